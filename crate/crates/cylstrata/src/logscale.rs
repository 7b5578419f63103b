//! Symbolic logarithmic scale factors.
//!
//! A [`LogScale`] represents a nonzero complex number `exp(log_magnitude) ·
//! e^{i·phase}` without ever forming it. Scale factors of cylindrical
//! functions routinely reach `10^{±500}` for high mode orders or extreme
//! arguments; carrying them in log-polar form lets products and reciprocals
//! be exact while the bounded "hatted" parts are handled in ordinary
//! floating point.
//!
//! Conversion back to a plain complex number is only sound inside a band
//! that keeps both the value and downstream squares representable; the
//! checked conversion enforces `|log_magnitude| ≤ 230` (`e^{230} ≈ 10^{100}`,
//! whose square still fits in an IEEE double). Products that are bounded by
//! construction (`|αβ| ≤ 1`, e.g. an inner-radius growth scale paired with an
//! outer-radius decay scale of the same layer) use the clamped conversion,
//! which may underflow to zero — the physically correct limit of a vanishing
//! cross-layer coupling.

use crate::error::{Error, Result};
use crate::C64;

/// Band inside which a checked conversion to `Complex64` is allowed.
pub const CONVERT_LIMIT: f64 = 230.0;

/// A complex scale factor in log-polar form: `exp(log_magnitude + i·phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScale {
    /// Natural log of the magnitude.
    pub log_magnitude: f64,
    /// Phase in radians (not reduced modulo 2π).
    pub phase: f64,
}

impl LogScale {
    /// The multiplicative identity (scale 1).
    pub const ONE: LogScale = LogScale {
        log_magnitude: 0.0,
        phase: 0.0,
    };

    /// Scale with the given log magnitude and zero phase.
    pub fn from_log_magnitude(log_magnitude: f64) -> Self {
        LogScale {
            log_magnitude,
            phase: 0.0,
        }
    }

    /// Scale equal to `exp(log_magnitude) · e^{i·phase}`.
    pub fn new(log_magnitude: f64, phase: f64) -> Self {
        LogScale {
            log_magnitude,
            phase,
        }
    }

    /// Product of two scales (logs add).
    #[must_use]
    pub fn mul(self, other: LogScale) -> LogScale {
        LogScale {
            log_magnitude: self.log_magnitude + other.log_magnitude,
            phase: self.phase + other.phase,
        }
    }

    /// Reciprocal scale (logs negate).
    #[must_use]
    pub fn inv(self) -> LogScale {
        LogScale {
            log_magnitude: -self.log_magnitude,
            phase: -self.phase,
        }
    }

    /// The square of this scale.
    #[must_use]
    pub fn squared(self) -> LogScale {
        LogScale {
            log_magnitude: 2.0 * self.log_magnitude,
            phase: 2.0 * self.phase,
        }
    }

    /// Checked conversion to a plain complex number.
    ///
    /// Fails when `|log_magnitude| > 230`: beyond that band the value (or a
    /// square formed from it downstream) no longer fits safely in a double.
    pub fn to_complex(self) -> Result<C64> {
        if self.log_magnitude.abs() > CONVERT_LIMIT {
            return Err(Error::ScaleOutOfRange(self.log_magnitude));
        }
        Ok(self.to_complex_unchecked())
    }

    /// Conversion for products that are bounded (`|·| ≤ 1`) by construction.
    ///
    /// Underflow to zero is allowed and correct; growth beyond a small
    /// round-off allowance indicates a bookkeeping bug and is a debug panic.
    pub fn to_complex_bounded(self) -> C64 {
        debug_assert!(
            self.log_magnitude <= 1e-6,
            "scale product expected bounded, got log magnitude {}",
            self.log_magnitude
        );
        self.to_complex_unchecked()
    }

    fn to_complex_unchecked(self) -> C64 {
        let mag = self.log_magnitude.exp();
        C64::new(mag * self.phase.cos(), mag * self.phase.sin())
    }
}

impl Default for LogScale {
    fn default() -> Self {
        LogScale::ONE
    }
}
