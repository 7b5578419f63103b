//! Range-conditioned cylinder functions.
//!
//! Every radial factor the solver touches is a Bessel function `J_n(k_ρ r)`
//! or an outgoing Hankel function `H^{(1)}_n(k_ρ r)` of complex argument.
//! Their raw magnitudes span hundreds of orders of magnitude across the
//! parameter régimes this library targets, so the solver never works with
//! raw values. Instead each function is factored as
//!
//! ```text
//! J_n(z) = β(n, z) · Ĵ_n(z),      H^{(1)}_n(z) = α(n, z) · Ĥ_n(z)
//! ```
//!
//! where the hatted values are ordinary doubles of benign magnitude and the
//! scale factors `α, β` (with `α·β = 1`) live in log-polar form
//! ([`LogScale`]). The factorization is chosen per argument régime:
//!
//! - **Small** (`|z| < 1e-4` and `n ≥ 5`): hatted values are the exact
//!   leading-order forms `Ĵ = 1`, `Ĵ' = n/z`, `Ĥ = -i/(nπ)`, `Ĥ' = i/(πz)`;
//!   the scale is the analytic prefactor `(z/2)^n/n!` in log-polar form.
//! - **Large** (`Im z ≥ 30`): the scale is the pure exponential `e^{Im z}`;
//!   hatted values come from the large-argument expansions (orders 0 and 1)
//!   extended by upward recurrence for `Ĥ` and downward (Miller) recurrence
//!   for `Ĵ` — both stable in those directions.
//! - **Moderate** (everything else): values come from the reference
//!   evaluators; the scale is `|J_n|` itself whenever `1/|J_n|` would exceed
//!   `1e100`, and unity otherwise, so hatted values and every product the
//!   field formulas form from them stay inside the double range.
//!
//! Derivative values carry the *same* scale as the function they derive
//! from, which is what lets the field expressions differentiate hatted
//! quantities directly.

pub mod reference;

use crate::logscale::LogScale;
use crate::C64;
use reference::{asymptotic_sigma, ln_factorial, Scaled};

/// Magnitude régime of one `(order, argument)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgumentClass {
    /// `|z| < 1e-4` and `n ≥ 5`: leading-order closed forms.
    Small,
    /// `Im z ≥ 30`: pure-exponential scaling.
    Large,
    /// Everything else: reference values, clamped by `|J_n|` when needed.
    Moderate,
}

/// Threshold below which an argument (at high enough order) uses the
/// leading-order closed forms.
pub const SMALL_ARG_LIMIT: f64 = 1e-4;
/// Minimum order for the small-argument closed forms.
pub const SMALL_ORDER_MIN: usize = 5;
/// Imaginary part at which the pure-exponential régime takes over.
pub const LARGE_IMAG_LIMIT: f64 = 30.0;
/// Magnitude margin for the moderate clamp: scale only when `1/|J_n|`
/// exceeds this.
pub const CLAMP_MARGIN: f64 = 1e100;

/// Decide the régime for order `n` at argument `z`.
pub fn classify(n: usize, z: C64) -> ArgumentClass {
    if z.im >= LARGE_IMAG_LIMIT {
        ArgumentClass::Large
    } else if z.norm() < SMALL_ARG_LIMIT && n >= SMALL_ORDER_MIN {
        ArgumentClass::Small
    } else {
        ArgumentClass::Moderate
    }
}

/// One conditioned evaluation: the four hatted values plus their shared
/// scale pair (`alpha · beta = 1`).
#[derive(Debug, Clone, Copy)]
pub struct ConditionedQuad {
    pub j_hat: C64,
    pub jp_hat: C64,
    pub h_hat: C64,
    pub hp_hat: C64,
    pub class: ArgumentClass,
    /// `H = alpha · Ĥ` (and `H' = alpha · Ĥ'`).
    pub alpha: LogScale,
    /// `J = beta · Ĵ` (and `J' = beta · Ĵ'`); `beta = alpha⁻¹`.
    pub beta: LogScale,
}

/// Conditioned evaluations for all orders `0..=n_max` at one argument.
pub fn conditioned_table(n_max: usize, z: C64) -> Vec<ConditionedQuad> {
    if z.im >= LARGE_IMAG_LIMIT {
        return large_table(n_max, z);
    }
    // Reference tables one order past n_max so derivatives exist everywhere.
    let j_raw = reference::bessel_j_table(n_max + 1, z);
    let h_raw = reference::hankel1_table(n_max + 1, z);
    (0..=n_max)
        .map(|n| {
            if z.norm() < SMALL_ARG_LIMIT && n >= SMALL_ORDER_MIN {
                small_quad(n, z)
            } else {
                moderate_quad(n, z, &j_raw, &h_raw)
            }
        })
        .collect()
}

/// Single-order convenience wrapper over [`conditioned_table`].
pub fn conditioned_quad(n: usize, z: C64) -> ConditionedQuad {
    conditioned_table(n, z).pop().unwrap()
}

/// Leading-order closed forms; the scale carries `(z/2)^n/n!` exactly.
fn small_quad(n: usize, z: C64) -> ConditionedQuad {
    let nf = n as f64;
    let beta = LogScale::new(
        nf * (z.norm() / 2.0).ln() - ln_factorial(n),
        nf * z.arg(),
    );
    ConditionedQuad {
        j_hat: C64::new(1.0, 0.0),
        jp_hat: C64::new(nf, 0.0) / z,
        h_hat: C64::new(0.0, -1.0) / (nf * std::f64::consts::PI),
        hp_hat: C64::new(0.0, 1.0) / (std::f64::consts::PI * z),
        class: ArgumentClass::Small,
        alpha: beta.inv(),
        beta,
    }
}

/// Reference values, scale-clamped by `|J_n|` once `1/|J_n|` would pass the
/// margin.
fn moderate_quad(n: usize, z: C64, j_raw: &[Scaled], h_raw: &[Scaled]) -> ConditionedQuad {
    let jp_raw = reference::derivative_from_table(j_raw, n, z);
    let hp_raw = reference::derivative_from_table(h_raw, n, z);
    let log_j = j_raw[n].log_abs();
    let clamp = log_j < -CLAMP_MARGIN.ln();
    let p_log = if clamp { log_j } else { 0.0 };
    let take = |s: &Scaled, shift: f64| s.mantissa * (s.log_scale + shift).exp();
    ConditionedQuad {
        j_hat: take(&j_raw[n], -p_log),
        jp_hat: take(&jp_raw, -p_log),
        h_hat: take(&h_raw[n], p_log),
        hp_hat: take(&hp_raw, p_log),
        class: ArgumentClass::Moderate,
        alpha: LogScale::new(-p_log, 0.0),
        beta: LogScale::new(p_log, 0.0),
    }
}

/// Pure-exponential régime: scale `e^{Im z}` shared by every order; hatted
/// tables built from the large-argument expansions of orders 0 and 1 plus
/// stable recurrences.
fn large_table(n_max: usize, z: C64) -> Vec<ConditionedQuad> {
    let beta = LogScale::new(z.im, 0.0);
    let alpha = beta.inv();
    // One past n_max for the derivative relation.
    let nn = n_max + 1;
    let h = large_h_hat_table(nn, z);
    let j = large_j_hat_table(nn, z);
    (0..=n_max)
        .map(|n| {
            let (jp, hp) = if n == 0 {
                (-j[1], -h[1])
            } else {
                let noz = C64::new(n as f64, 0.0) / z;
                (j[n - 1] - noz * j[n], h[n - 1] - noz * h[n])
            };
            ConditionedQuad {
                j_hat: j[n],
                jp_hat: jp,
                h_hat: h[n],
                hp_hat: hp,
                class: ArgumentClass::Large,
                alpha,
                beta,
            }
        })
        .collect()
}

/// `Ĥ_n = H_n e^{Im z}` for `n = 0..=n_max`: orders 0, 1 from the
/// asymptotic series, the rest by upward recurrence (stable because the
/// Hankel function dominates in order).
fn large_h_hat_table(n_max: usize, z: C64) -> Vec<C64> {
    let pref = (C64::new(2.0, 0.0) / (std::f64::consts::PI * z)).sqrt();
    let direct = |n: usize| {
        let chi_re = z.re - (n as f64) * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
        pref * C64::new(0.0, chi_re).exp() * asymptotic_sigma(n, z, 1.0)
    };
    let mut table = Vec::with_capacity(n_max + 1);
    table.push(direct(0));
    if n_max == 0 {
        return table;
    }
    table.push(direct(1));
    let two_over_z = C64::new(2.0, 0.0) / z;
    for n in 1..n_max {
        let next = two_over_z * C64::new(n as f64, 0.0) * table[n] - table[n - 1];
        table.push(next);
    }
    table
}

/// `Ĵ_n = J_n e^{-Im z}` for `n = 0..=n_max`: downward (Miller) recurrence
/// normalized to the order-0 asymptotic value. Rescales on the way down so
/// intermediate ratios stay representable at high order.
///
/// The Miller start index grows with `|z|`, so when every requested order
/// sits deep inside the oscillatory regime (`|z|` far above `n_max`) the
/// table is built the same way as the Hankel one instead: seed orders 0/1
/// from the asymptotic series and recur upward, which is stable while
/// `n ≪ |z|` and costs `O(n_max)` rather than `O(|z|)`.
fn large_j_hat_table(n_max: usize, z: C64) -> Vec<C64> {
    let pref = (C64::new(2.0, 0.0) / (std::f64::consts::PI * z)).sqrt();
    let direct = |n: usize| {
        // The suppressed exponential of J is below double precision here
        // (Im z ≥ 30 in this régime), so the dominant one alone is exact.
        let chi_re = z.re - (n as f64) * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
        pref * C64::new(0.0, -chi_re).exp() * asymptotic_sigma(n, z, -1.0) * 0.5
    };
    if z.norm() >= 1e3 && z.norm() >= 4.0 * (n_max as f64 + 2.0) {
        return ascending_j_hat_table(n_max, z, &direct);
    }
    miller_j_hat_table(n_max, z, direct(0))
}

/// Upward-recurrence branch of [`large_j_hat_table`], valid for `n ≪ |z|`.
fn ascending_j_hat_table(n_max: usize, z: C64, direct: &dyn Fn(usize) -> C64) -> Vec<C64> {
    let mut table = Vec::with_capacity(n_max + 1);
    table.push(direct(0));
    if n_max == 0 {
        return table;
    }
    table.push(direct(1));
    let two_over_z = C64::new(2.0, 0.0) / z;
    for n in 1..n_max {
        let next = two_over_z * C64::new(n as f64, 0.0) * table[n] - table[n - 1];
        table.push(next);
    }
    table
}

/// Downward-recurrence branch of [`large_j_hat_table`], normalized to the
/// supplied order-0 value.
fn miller_j_hat_table(n_max: usize, z: C64, j0: C64) -> Vec<C64> {
    let start = reference::miller_start(n_max, z.norm());
    let two_over_z = C64::new(2.0, 0.0) / z;
    let mut hi = C64::new(0.0, 0.0);
    let mut lo = C64::new(1e-30, 0.0);
    let mut offset = 0.0f64;
    let mut raw = vec![(C64::new(0.0, 0.0), 0.0f64); n_max + 1];
    for m in (0..=start).rev() {
        if m <= n_max {
            raw[m] = (lo, offset);
        }
        if m == 0 {
            break;
        }
        let next = two_over_z * C64::new(m as f64, 0.0) * lo - hi;
        hi = lo;
        lo = next;
        if lo.norm() > 1e250 {
            lo *= 1e-250;
            hi *= 1e-250;
            offset += 1e250f64.ln();
        }
    }
    let (r0, off0) = raw[0];
    // Scaled division: the naive quotient squares |r0| (often far beyond
    // 1e154) and would overflow to give an exact zero.
    let scale = j0.fdiv(r0);
    raw.into_iter()
        .map(|(r, off)| r * scale * (off - off0).exp())
        .collect()
}
