//! Dense complex 2×2 matrices.
//!
//! Everything in the interface algebra is 2×2 (the two rows are the TM/TE —
//! here `E_z`/`H_z` — polarizations, coupled by the azimuthal mode order), so
//! a tiny fixed-size type with closed-form inversion beats a general linear
//! algebra dependency. Inversion uses the adjugate formula; a vanishing
//! determinant is reported rather than silently propagated.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::logscale::LogScale;
use crate::C64;

/// A complex 2×2 matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub m: [[C64; 2]; 2],
}

/// A 2×2 matrix with a symbolic scale factor: value = `scale · m`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledMat2 {
    /// Bounded matrix part.
    pub m: Mat2,
    /// Symbolic scale.
    pub scale: LogScale,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        m: [[C64::new(0.0, 0.0); 2]; 2],
    };

    /// Identity matrix.
    pub fn identity() -> Mat2 {
        Mat2::diag(C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    }

    pub fn new(a11: C64, a12: C64, a21: C64, a22: C64) -> Mat2 {
        Mat2 {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub fn diag(a11: C64, a22: C64) -> Mat2 {
        Mat2::new(a11, C64::new(0.0, 0.0), C64::new(0.0, 0.0), a22)
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Adjugate inverse. Errors when `|det|` underflows the hard floor used
    /// by the interface solver (1e-280).
    pub fn inv(&self) -> Result<Mat2> {
        let d = self.det();
        let dn = d.norm();
        if dn < 1e-280 {
            return Err(Error::SingularMatrix(dn));
        }
        // Scaled division (`fdiv`): naive complex division squares |det|,
        // which over/underflows for legitimately extreme determinants.
        Ok(Mat2::new(
            self.m[1][1].fdiv(d),
            (-self.m[0][1]).fdiv(d),
            (-self.m[1][0]).fdiv(d),
            self.m[0][0].fdiv(d),
        ))
    }

    /// Matrix–vector product.
    pub fn mul_vec(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Scalar multiple.
    #[must_use]
    pub fn scale(&self, s: C64) -> Mat2 {
        Mat2::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    /// Largest entry magnitude (used by finiteness diagnostics and tests).
    pub fn max_norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.m
            .iter()
            .flatten()
            .all(|e| e.re.is_finite() && e.im.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + r.m[0][0],
            self.m[0][1] + r.m[0][1],
            self.m[1][0] + r.m[1][0],
            self.m[1][1] + r.m[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] - r.m[0][0],
            self.m[0][1] - r.m[0][1],
            self.m[1][0] - r.m[1][0],
            self.m[1][1] - r.m[1][1],
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] * r.m[0][0] + self.m[0][1] * r.m[1][0],
            self.m[0][0] * r.m[0][1] + self.m[0][1] * r.m[1][1],
            self.m[1][0] * r.m[0][0] + self.m[1][1] * r.m[1][0],
            self.m[1][0] * r.m[0][1] + self.m[1][1] * r.m[1][1],
        )
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(C64::new(-1.0, 0.0))
    }
}
