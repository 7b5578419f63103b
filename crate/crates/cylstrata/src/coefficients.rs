//! Conditioned 2×2 reflection/transmission algebra for the layered cylinder.
//!
//! Radial propagation couples the axial field pair `[E_z; H_z]`, so every
//! interface carries 2×2 reflection and transmission operators. Raw
//! operators would inherit the astronomical magnitudes of the cylinder
//! functions; here every operator is stored *hatted* — built purely from
//! hatted function values — while its true magnitude lives in a [`LogScale`]
//! that the caller recombines. The recursions that chain interfaces
//! together only ever materialize scale *products* of the form
//! `β(inner radius)·α(outer radius)` for one layer, which are bounded by
//! unity, so no intermediate can overflow.
//!
//! Index conventions (0-based throughout): layers `0..N-1` from the axis
//! out; interface `m` sits at radius `a_m` between layers `m` and `m+1`.
//! "Outgoing" quantities propagate outward (source side inward), "standing"
//! quantities the reverse.

use crate::error::{Error, Result};
use crate::logscale::LogScale;
use crate::mat2::Mat2;
use crate::medium::LayerStack;
use crate::special::{conditioned_table, ConditionedQuad};
use crate::C64;

/// Everything reusable across orders and observation radii at one spectral
/// point `k_z`: per-layer constitutives and the conditioned function tables
/// at every interface radius.
pub struct SpectralWorkspace<'a> {
    pub stack: &'a LayerStack,
    pub omega: f64,
    pub k_z: C64,
    /// Per-layer radial wavenumber (physical sheet, or tracked override).
    pub k_rho: Vec<C64>,
    pub eps: Vec<C64>,
    pub mu: Vec<C64>,
    /// Highest order the tables cover.
    pub n_max: usize,
    /// Layer `l` evaluated at its inner boundary `a_{l-1}` (`None` for `l=0`).
    inner_quads: Vec<Option<Vec<ConditionedQuad>>>,
    /// Layer `l` evaluated at its outer boundary `a_l` (`None` for the
    /// outermost layer).
    outer_quads: Vec<Option<Vec<ConditionedQuad>>>,
}

impl<'a> SpectralWorkspace<'a> {
    /// Build tables for orders `0..=n_max`. `k_rho_override` substitutes
    /// sheet-tracked radial wavenumbers when provided.
    pub fn new(
        stack: &'a LayerStack,
        omega: f64,
        k_z: C64,
        n_max: usize,
        k_rho_override: Option<&[C64]>,
    ) -> Self {
        let k_rho: Vec<C64> = match k_rho_override {
            Some(kr) => kr.to_vec(),
            None => crate::medium::SpectralState::new(stack, omega, k_z).k_rho,
        };
        let n = stack.len();
        let eps = stack.layers.iter().map(|l| l.eps(omega)).collect();
        let mu = stack.layers.iter().map(|l| l.mu(omega)).collect();
        let mut inner_quads = Vec::with_capacity(n);
        let mut outer_quads = Vec::with_capacity(n);
        for l in 0..n {
            inner_quads.push(if l == 0 {
                None
            } else {
                Some(conditioned_table(
                    n_max,
                    k_rho[l] * stack.interface_radius(l - 1),
                ))
            });
            outer_quads.push(if l + 1 == n {
                None
            } else {
                Some(conditioned_table(
                    n_max,
                    k_rho[l] * stack.interface_radius(l),
                ))
            });
        }
        SpectralWorkspace {
            stack,
            omega,
            k_z,
            k_rho,
            eps,
            mu,
            n_max,
            inner_quads,
            outer_quads,
        }
    }

    /// Layer `l` at its inner boundary radius `a_{l-1}`.
    pub fn quad_inner(&self, l: usize, n: usize) -> &ConditionedQuad {
        &self.inner_quads[l].as_ref().expect("layer has inner boundary")[n]
    }

    /// Layer `l` at its outer boundary radius `a_l`.
    pub fn quad_outer(&self, l: usize, n: usize) -> &ConditionedQuad {
        &self.outer_quads[l].as_ref().expect("layer has outer boundary")[n]
    }

    /// Conditioned table for layer `l` at an arbitrary radius (source or
    /// observation point).
    pub fn quads_at(&self, l: usize, rho: f64) -> Vec<ConditionedQuad> {
        conditioned_table(self.n_max, self.k_rho[l] * rho)
    }

    /// The bounded cross-layer coupling of interior layer `l`:
    /// `(β_l(a_{l-1})·α_l(a_l))²` materialized as a plain complex number.
    /// Magnitude ≤ 1 by the monotonicity of the conditioning scales.
    pub fn cross(&self, l: usize, n: usize) -> C64 {
        let b = self.quad_inner(l, n).beta;
        let a = self.quad_outer(l, n).alpha;
        b.mul(a).squared().to_complex_bounded()
    }
}

/// Hatted coupled-field Bessel matrix of one layer at one radius:
/// ```text
/// J̄̂ = [ iωε Ĵ'/k_ρ         -n k_z Ĵ/(k_ρ² ρ) ]
///      [ -n k_z Ĵ/(k_ρ² ρ)  -iωμ Ĵ'/k_ρ       ]
/// ```
/// built from hatted values, so it shares the scalar `β` of `Ĵ`.
pub fn hatted_j_matrix(
    n: usize,
    q: &ConditionedQuad,
    k_rho: C64,
    rho: f64,
    eps: C64,
    mu: C64,
    k_z: C64,
    omega: f64,
) -> Mat2 {
    coupling_matrix(n, q.j_hat, q.jp_hat, k_rho, rho, eps, mu, k_z, omega)
}

/// Same bracket built on the outgoing function; shares the scalar `α` of `Ĥ`.
pub fn hatted_h_matrix(
    n: usize,
    q: &ConditionedQuad,
    k_rho: C64,
    rho: f64,
    eps: C64,
    mu: C64,
    k_z: C64,
    omega: f64,
) -> Mat2 {
    coupling_matrix(n, q.h_hat, q.hp_hat, k_rho, rho, eps, mu, k_z, omega)
}

#[allow(clippy::too_many_arguments)]
fn coupling_matrix(
    n: usize,
    f: C64,
    fp: C64,
    k_rho: C64,
    rho: f64,
    eps: C64,
    mu: C64,
    k_z: C64,
    omega: f64,
) -> Mat2 {
    let i = C64::new(0.0, 1.0);
    let off = -C64::new(n as f64, 0.0) * k_z * f / (k_rho * k_rho * rho);
    Mat2::new(
        i * omega * eps * fp / k_rho,
        off,
        off,
        -i * omega * mu * fp / k_rho,
    )
}

/// Local (single-interface) hatted operators plus the scale context needed
/// to recover raw magnitudes:
/// true `R_out = alpha_inner²·r_out_hat`, `R_in = beta_outer²·r_in_hat`,
/// `T = alpha_inner·beta_outer·t_hat` (both directions).
#[derive(Debug, Clone)]
pub struct LocalRt {
    /// Reflection of an outgoing wave in the inner layer.
    pub r_out_hat: Mat2,
    /// Reflection of a standing (inward) wave in the outer layer.
    pub r_in_hat: Mat2,
    /// Transmission inner → outer.
    pub t_out_hat: Mat2,
    /// Transmission outer → inner.
    pub t_in_hat: Mat2,
    /// `α` of the inner layer at this interface radius.
    pub alpha_inner: LogScale,
    /// `β` of the outer layer at this interface radius.
    pub beta_outer: LogScale,
}

/// Determinant floor below which an interface system counts as singular.
const DET_FLOOR: f64 = 1e-280;

fn invert_interface(m: &Mat2, k_z: C64) -> Result<Mat2> {
    let d = m.det();
    if !d.is_finite() || d.norm() < DET_FLOOR {
        return Err(Error::SingularInterfaceSystem(k_z, d.norm()));
    }
    m.inv().map_err(|_| Error::SingularInterfaceSystem(k_z, d.norm()))
}

/// Inversion of the dimensionless multiple-reflection brackets `I - X`:
/// adds a relative determinant test (these matrices are O(1)-balanced, so a
/// relatively tiny determinant means a guided-mode pole at this `k_z`).
fn invert_bracket(m: &Mat2, k_z: C64) -> Result<Mat2> {
    let d = m.det();
    let scale = m.max_norm().max(1.0);
    if !d.is_finite() || d.norm() < DET_FLOOR || d.norm() < 1e-14 * scale * scale {
        return Err(Error::SingularInterfaceSystem(k_z, d.norm()));
    }
    m.inv().map_err(|_| Error::SingularInterfaceSystem(k_z, d.norm()))
}

/// Local hatted reflection/transmission set at interface `m` for order `n`.
pub fn local_rt_hat(n: usize, ws: &SpectralWorkspace, m: usize) -> Result<LocalRt> {
    let (l1, l2) = (m, m + 1);
    let a = ws.stack.interface_radius(m);
    let q1 = ws.quad_outer(l1, n);
    let q2 = ws.quad_inner(l2, n);
    let jm1 = hatted_j_matrix(n, q1, ws.k_rho[l1], a, ws.eps[l1], ws.mu[l1], ws.k_z, ws.omega);
    let hm1 = hatted_h_matrix(n, q1, ws.k_rho[l1], a, ws.eps[l1], ws.mu[l1], ws.k_z, ws.omega);
    let jm2 = hatted_j_matrix(n, q2, ws.k_rho[l2], a, ws.eps[l2], ws.mu[l2], ws.k_z, ws.omega);
    let hm2 = hatted_h_matrix(n, q2, ws.k_rho[l2], a, ws.eps[l2], ws.mu[l2], ws.k_z, ws.omega);

    let d_hat = jm1.scale(q2.h_hat) - hm2.scale(q1.j_hat);
    let d_inv = invert_interface(&d_hat, ws.k_z)?;

    let r_out_hat = d_inv * (hm2.scale(q1.h_hat) - hm1.scale(q2.h_hat));
    let r_in_hat = d_inv * (jm2.scale(q1.j_hat) - jm1.scale(q2.j_hat));

    let wron = 2.0 * ws.omega / std::f64::consts::PI;
    let t_out_hat = d_inv
        .scale(C64::new(wron, 0.0) / (ws.k_rho[l1] * ws.k_rho[l1] * a))
        * Mat2::diag(ws.eps[l1], -ws.mu[l1]);
    let t_in_hat = d_inv
        .scale(C64::new(wron, 0.0) / (ws.k_rho[l2] * ws.k_rho[l2] * a))
        * Mat2::diag(ws.eps[l2], -ws.mu[l2]);

    Ok(LocalRt {
        r_out_hat,
        r_in_hat,
        t_out_hat,
        t_in_hat,
        alpha_inner: q1.alpha,
        beta_outer: q2.beta,
    })
}

/// Local sets for every interface plus both generalized-reflection ladders,
/// all hatted, for one order.
pub struct CoefficientSet {
    pub local: Vec<LocalRt>,
    /// `r_out_gen[m]`: generalized outward reflection seen by an outgoing
    /// wave in layer `m` at interface `m` (true value `α_m(a_m)²·hat`).
    pub r_out_gen: Vec<Mat2>,
    /// `r_in_gen[m]`: generalized inward reflection seen by a standing wave
    /// in layer `m+1` at interface `m` (true value `β_{m+1}(a_m)²·hat`).
    pub r_in_gen: Vec<Mat2>,
}

impl CoefficientSet {
    /// Build local operators and run both recursions. The outgoing ladder
    /// is seeded at the outermost interface (radiation condition: nothing
    /// reflects back from infinity beyond it), the standing ladder at the
    /// innermost (regularity on the axis).
    pub fn build(n: usize, ws: &SpectralWorkspace) -> Result<CoefficientSet> {
        let ni = ws.stack.interface_count();
        let mut local = Vec::with_capacity(ni);
        for m in 0..ni {
            local.push(local_rt_hat(n, ws, m)?);
        }

        let mut r_out_gen = vec![Mat2::ZERO; ni];
        let mut r_in_gen = vec![Mat2::ZERO; ni];
        if ni > 0 {
            r_out_gen[ni - 1] = local[ni - 1].r_out_hat;
            for m in (0..ni.saturating_sub(1)).rev() {
                let cross = ws.cross(m + 1, n);
                let bracket = Mat2::identity()
                    - (local[m].r_in_hat * r_out_gen[m + 1]).scale(cross);
                let inv = invert_bracket(&bracket, ws.k_z)?;
                r_out_gen[m] = local[m].r_out_hat
                    + (local[m].t_in_hat * r_out_gen[m + 1] * inv * local[m].t_out_hat)
                        .scale(cross);
            }

            r_in_gen[0] = local[0].r_in_hat;
            for m in 1..ni {
                let cross = ws.cross(m, n);
                let bracket = Mat2::identity()
                    - (local[m].r_out_hat * r_in_gen[m - 1]).scale(cross);
                let inv = invert_bracket(&bracket, ws.k_z)?;
                r_in_gen[m] = local[m].r_in_hat
                    + (local[m].t_out_hat * r_in_gen[m - 1] * inv * local[m].t_in_hat)
                        .scale(cross);
            }
        }

        Ok(CoefficientSet {
            local,
            r_out_gen,
            r_in_gen,
        })
    }

    fn interface_count(&self) -> usize {
        self.local.len()
    }

    /// Multiple-reflection resolvent of layer `j` for outgoing sources:
    /// `[I - cross(j)·r̃_in(j-1)·r̃_out(j)]⁻¹`; identity when either side
    /// is missing (axis-adjacent or outermost layer).
    pub fn m_plus(&self, j: usize, ws: &SpectralWorkspace, n: usize) -> Result<Mat2> {
        if j == 0 || j >= self.interface_count() {
            return Ok(Mat2::identity());
        }
        let cross = ws.cross(j, n);
        let bracket =
            Mat2::identity() - (self.r_in_gen[j - 1] * self.r_out_gen[j]).scale(cross);
        invert_bracket(&bracket, ws.k_z)
    }

    /// Same resolvent with the opposite composition order (standing
    /// sources): `[I - cross(j)·r̃_out(j)·r̃_in(j-1)]⁻¹`.
    pub fn m_minus(&self, j: usize, ws: &SpectralWorkspace, n: usize) -> Result<Mat2> {
        if j == 0 || j >= self.interface_count() {
            return Ok(Mat2::identity());
        }
        let cross = ws.cross(j, n);
        let bracket =
            Mat2::identity() - (self.r_out_gen[j] * self.r_in_gen[j - 1]).scale(cross);
        invert_bracket(&bracket, ws.k_z)
    }

    /// Transit resolvent for outward passage through layer `k`: the first
    /// factor is the *local* inward reflection (the wave has already left
    /// the region below): `[I - cross(k)·r̂_in(k-1)·r̃_out(k)]⁻¹`.
    pub fn n_plus(&self, k: usize, ws: &SpectralWorkspace, n: usize) -> Result<Mat2> {
        if k == 0 || k >= self.interface_count() {
            return Ok(Mat2::identity());
        }
        let cross = ws.cross(k, n);
        let bracket =
            Mat2::identity() - (self.local[k - 1].r_in_hat * self.r_out_gen[k]).scale(cross);
        invert_bracket(&bracket, ws.k_z)
    }

    /// Transit resolvent for inward passage through layer `k`:
    /// `[I - cross(k)·r̂_out(k)·r̃_in(k-1)]⁻¹`.
    pub fn n_minus(&self, k: usize, ws: &SpectralWorkspace, n: usize) -> Result<Mat2> {
        if k == 0 || k >= self.interface_count() {
            return Ok(Mat2::identity());
        }
        let cross = ws.cross(k, n);
        let bracket =
            Mat2::identity() - (self.local[k].r_out_hat * self.r_in_gen[k - 1]).scale(cross);
        invert_bracket(&bracket, ws.k_z)
    }
}

/// A generalized transmission operator in hatted form. The true operator is
/// `lead · t_hat · trail` — the two unbounded end scales are kept symbolic
/// for the field assembly to pair with its own radial factors (each pairing
/// is bounded).
pub struct TransmissionHat {
    pub t_hat: Mat2,
    /// Scale of the observation-layer end: `β_i(a_{i-1})` outgoing,
    /// `α_i(a_i)` standing.
    pub lead: LogScale,
    /// Scale of the source-layer end: `α_j(a_j)` outgoing, `β_j(a_{j-1})`
    /// standing.
    pub trail: LogScale,
}

/// Ordered multi-interface transmission from source layer `j` to
/// observation layer `i ≠ j`. Outgoing (`i > j`) walks interfaces from the
/// observation side down: leftmost factor crosses interface `i-1`,
/// rightmost crosses `j`; the standing direction mirrors this.
pub fn generalized_transmission(
    n: usize,
    ws: &SpectralWorkspace,
    set: &CoefficientSet,
    j: usize,
    i: usize,
) -> Result<TransmissionHat> {
    assert_ne!(i, j, "transmission requires distinct layers");
    if i > j {
        let mut t = set.local[i - 1].t_out_hat;
        for k in (j + 1..i).rev() {
            let step = (set.n_plus(k, ws, n)? * set.local[k - 1].t_out_hat)
                .scale(ws.cross(k, n));
            t = t * step;
        }
        Ok(TransmissionHat {
            t_hat: t,
            lead: ws.quad_inner(i, n).beta,
            trail: ws.quad_outer(j, n).alpha,
        })
    } else {
        let mut t = set.local[i].t_in_hat;
        for k in i + 1..j {
            let step = (set.n_minus(k, ws, n)? * set.local[k].t_in_hat).scale(ws.cross(k, n));
            t = t * step;
        }
        Ok(TransmissionHat {
            t_hat: t,
            lead: ws.quad_outer(i, n).alpha,
            trail: ws.quad_inner(j, n).beta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::Layer;
    use crate::special::reference;

    const OMEGA: f64 = 2.0 * std::f64::consts::PI * 36e3;

    fn layer(eps_r: f64, sigma: f64, r: Option<f64>) -> Layer {
        Layer {
            eps_r,
            sigma,
            mu_r: 1.0,
            sigma_m: 0.0,
            outer_radius: r,
        }
    }

    fn benign_three() -> LayerStack {
        LayerStack::new(vec![
            layer(1.0, 0.05, Some(0.10)),
            layer(3.0, 0.2, Some(0.16)),
            layer(1.5, 0.01, None),
        ])
        .unwrap()
    }

    fn benign_four() -> LayerStack {
        LayerStack::new(vec![
            layer(1.0, 0.05, Some(0.10)),
            layer(3.0, 0.2, Some(0.16)),
            layer(2.0, 0.5, Some(0.22)),
            layer(1.5, 0.01, None),
        ])
        .unwrap()
    }

    /// Plain (unconditioned) function quad via the reference evaluators —
    /// valid only where raw values are representable.
    fn raw_quad(n: usize, z: C64) -> (C64, C64, C64, C64) {
        let jt = reference::bessel_j_table(n + 1, z);
        let ht = reference::hankel1_table(n + 1, z);
        (
            jt[n].value(),
            reference::derivative_from_table(&jt, n, z).value(),
            ht[n].value(),
            reference::derivative_from_table(&ht, n, z).value(),
        )
    }

    struct RawLocal {
        r12: Mat2,
        r21: Mat2,
        t12: Mat2,
        t21: Mat2,
    }

    /// Textbook (unconditioned) local operators, assembled from raw values.
    fn raw_local(n: usize, ws: &SpectralWorkspace, m: usize) -> RawLocal {
        let (l1, l2) = (m, m + 1);
        let a = ws.stack.interface_radius(m);
        let (z1, z2) = (ws.k_rho[l1] * a, ws.k_rho[l2] * a);
        let (j1, jp1, h1, hp1) = raw_quad(n, z1);
        let (j2, jp2, h2, hp2) = raw_quad(n, z2);
        let mk = |f: C64, fp: C64, l: usize| {
            coupling_matrix(n, f, fp, ws.k_rho[l], a, ws.eps[l], ws.mu[l], ws.k_z, ws.omega)
        };
        let (jm1, hm1) = (mk(j1, jp1, l1), mk(h1, hp1, l1));
        let (jm2, hm2) = (mk(j2, jp2, l2), mk(h2, hp2, l2));
        let d = jm1.scale(h2) - hm2.scale(j1);
        let d_inv = d.inv().unwrap();
        let wron = 2.0 * ws.omega / std::f64::consts::PI;
        RawLocal {
            r12: d_inv * (hm2.scale(h1) - hm1.scale(h2)),
            r21: d_inv * (jm2.scale(j1) - jm1.scale(j2)),
            t12: d_inv.scale(C64::new(wron, 0.0) / (ws.k_rho[l1] * ws.k_rho[l1] * a))
                * Mat2::diag(ws.eps[l1], -ws.mu[l1]),
            t21: d_inv.scale(C64::new(wron, 0.0) / (ws.k_rho[l2] * ws.k_rho[l2] * a))
                * Mat2::diag(ws.eps[l2], -ws.mu[l2]),
        }
    }

    fn rel_diff(a: &Mat2, b: &Mat2) -> f64 {
        let denom = a.max_norm().max(b.max_norm()).max(1e-300);
        ((*a - *b).max_norm()) / denom
    }

    /// Scales are all unity for these benign stacks, so hatted must equal
    /// raw directly.
    #[test]
    fn local_operators_match_raw_oracle() {
        let stack = benign_three();
        for &kz in &[C64::new(0.3, 0.1), C64::new(2.0, 0.8), C64::new(0.02, 0.0)] {
            let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 8, None);
            for m in 0..stack.interface_count() {
                for n in [0usize, 1, 4, 8] {
                    let got = local_rt_hat(n, &ws, m).unwrap();
                    assert_eq!(got.alpha_inner.log_magnitude, 0.0);
                    assert_eq!(got.beta_outer.log_magnitude, 0.0);
                    let raw = raw_local(n, &ws, m);
                    assert!(rel_diff(&got.r_out_hat, &raw.r12) < 1e-10, "r12 n={n} m={m}");
                    assert!(rel_diff(&got.r_in_hat, &raw.r21) < 1e-10, "r21 n={n} m={m}");
                    assert!(rel_diff(&got.t_out_hat, &raw.t12) < 1e-10, "t12 n={n} m={m}");
                    assert!(rel_diff(&got.t_in_hat, &raw.t21) < 1e-10, "t21 n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn identical_layers_give_null_interface() {
        // A zero-contrast interface must be invisible: R̂ = 0, T̂ = I.
        let stack = LayerStack::new(vec![
            layer(2.0, 0.3, Some(0.12)),
            layer(2.0, 0.3, None),
        ])
        .unwrap();
        let mut rng = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let kz = C64::new(4.0 * next() - 1.0, 2.0 * next());
            let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 30, None);
            for n in [0usize, 3, 17, 30] {
                let rt = local_rt_hat(n, &ws, 0).unwrap();
                assert!(rt.r_out_hat.max_norm() < 1e-12, "R̂out n={n} kz={kz}");
                assert!(rt.r_in_hat.max_norm() < 1e-12, "R̂in n={n} kz={kz}");
                assert!(
                    rel_diff(&rt.t_out_hat, &Mat2::identity()) < 1e-12,
                    "T̂out n={n} kz={kz}"
                );
                assert!(
                    rel_diff(&rt.t_in_hat, &Mat2::identity()) < 1e-12,
                    "T̂in n={n} kz={kz}"
                );
            }
        }
    }

    /// Three-layer generalized reflection against the textbook one-step
    /// recursion evaluated with raw operators.
    #[test]
    fn generalized_reflection_matches_raw_recursion() {
        let stack = benign_three();
        for &kz in &[C64::new(0.5, 0.2), C64::new(1.5, 0.5)] {
            let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 6, None);
            for n in [0usize, 2, 6] {
                let set = CoefficientSet::build(n, &ws).unwrap();
                let raw0 = raw_local(n, &ws, 0);
                let raw1 = raw_local(n, &ws, 1);
                // Outgoing, seen from layer 0: R̃ = R01 + T10·R̃12·[I - R10·R̃12]⁻¹·T01
                let bracket = (Mat2::identity() - raw0.r21 * raw1.r12).inv().unwrap();
                let expect_out = raw0.r12 + raw0.t21 * raw1.r12 * bracket * raw0.t12;
                assert!(
                    rel_diff(&set.r_out_gen[0], &expect_out) < 1e-10,
                    "out n={n} kz={kz}"
                );
                // Standing, seen from layer 2: R̃ = R21 + T12·R̃10·[I - R12·R̃10]⁻¹·T21
                let bracket = (Mat2::identity() - raw1.r12 * raw0.r21).inv().unwrap();
                let expect_in = raw1.r21 + raw1.t12 * raw0.r21 * bracket * raw1.t21;
                assert!(
                    rel_diff(&set.r_in_gen[1], &expect_in) < 1e-10,
                    "in n={n} kz={kz}"
                );
            }
        }
    }

    /// Four-layer ordered transmission products, both directions, against
    /// the raw chain.
    #[test]
    fn generalized_transmission_matches_raw_products() {
        let stack = benign_four();
        let kz = C64::new(0.8, 0.3);
        let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 5, None);
        for n in [0usize, 1, 5] {
            let set = CoefficientSet::build(n, &ws).unwrap();
            let raws: Vec<RawLocal> = (0..3).map(|m| raw_local(n, &ws, m)).collect();

            // Raw generalized outgoing ladder (seeded at the outermost).
            let mut rg_out = vec![Mat2::ZERO; 3];
            rg_out[2] = raws[2].r12;
            for m in (0..2).rev() {
                let b = (Mat2::identity() - raws[m].r21 * rg_out[m + 1]).inv().unwrap();
                rg_out[m] = raws[m].r12 + raws[m].t21 * rg_out[m + 1] * b * raws[m].t12;
            }
            // Raw standing ladder.
            let mut rg_in = vec![Mat2::ZERO; 3];
            rg_in[0] = raws[0].r21;
            for m in 1..3 {
                let b = (Mat2::identity() - raws[m].r12 * rg_in[m - 1]).inv().unwrap();
                rg_in[m] = raws[m].r21 + raws[m].t12 * rg_in[m - 1] * b * raws[m].t21;
            }

            // Outgoing source layer 0 → obs layer 3:
            // T = T23 · [N2+ T12] · [N1+ T01], Nk+ = [I - Rk,k-1·R̃k,k+1]⁻¹.
            let n2 = (Mat2::identity() - raws[1].r21 * rg_out[2]).inv().unwrap();
            let n1 = (Mat2::identity() - raws[0].r21 * rg_out[1]).inv().unwrap();
            let expect = raws[2].t12 * (n2 * raws[1].t12) * (n1 * raws[0].t12);
            let got = generalized_transmission(n, &ws, &set, 0, 3).unwrap();
            assert_eq!(got.lead.log_magnitude, 0.0);
            assert_eq!(got.trail.log_magnitude, 0.0);
            assert!(rel_diff(&got.t_hat, &expect) < 1e-10, "outgoing n={n}");

            // Standing source layer 3 → obs layer 0:
            // T = T10 · [N1- T21] · [N2- T32], Nk- = [I - Rk,k+1·R̃k,k-1]⁻¹.
            let n1m = (Mat2::identity() - raws[1].r12 * rg_in[0]).inv().unwrap();
            let n2m = (Mat2::identity() - raws[2].r12 * rg_in[1]).inv().unwrap();
            let expect = raws[0].t21 * (n1m * raws[1].t21) * (n2m * raws[2].t21);
            let got = generalized_transmission(n, &ws, &set, 3, 0).unwrap();
            assert!(rel_diff(&got.t_hat, &expect) < 1e-10, "standing n={n}");

            // Adjacent layers: the product collapses to the local operator.
            let got = generalized_transmission(n, &ws, &set, 0, 1).unwrap();
            assert!(rel_diff(&got.t_hat, &set.local[0].t_out_hat) < 1e-14);
        }
    }

    /// Collapsing an interior layer to zero contrast must leave every
    /// generalized coefficient unchanged.
    #[test]
    fn layer_merge_invariance() {
        let three = benign_three();
        // Split layer 1 of `three` into two identical sublayers.
        let four = LayerStack::new(vec![
            layer(1.0, 0.05, Some(0.10)),
            layer(3.0, 0.2, Some(0.13)),
            layer(3.0, 0.2, Some(0.16)),
            layer(1.5, 0.01, None),
        ])
        .unwrap();
        let kz = C64::new(0.7, 0.25);
        for n in [0usize, 2, 5] {
            let ws3 = SpectralWorkspace::new(&three, OMEGA, kz, 5, None);
            let ws4 = SpectralWorkspace::new(&four, OMEGA, kz, 5, None);
            let s3 = CoefficientSet::build(n, &ws3).unwrap();
            let s4 = CoefficientSet::build(n, &ws4).unwrap();
            // Innermost interface sees the same world.
            assert!(rel_diff(&s3.r_out_gen[0], &s4.r_out_gen[0]) < 1e-10, "n={n}");
            // Outermost interface likewise (index shifts by one).
            assert!(
                rel_diff(&s3.r_in_gen[1], &s4.r_in_gen[2]) < 1e-10,
                "n={n} standing"
            );
        }
    }

    /// M̃/N̄ resolvents: identity for degenerate geometry, raw-oracle match
    /// for a genuine three-layer middle layer.
    #[test]
    fn resolvent_factors() {
        let stack = benign_three();
        let kz = C64::new(0.6, 0.2);
        let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 4, None);
        for n in [0usize, 3] {
            let set = CoefficientSet::build(n, &ws).unwrap();
            // Edge layers have a missing side → identity.
            assert!(rel_diff(&set.m_plus(0, &ws, n).unwrap(), &Mat2::identity()) < 1e-15);
            assert!(rel_diff(&set.m_minus(2, &ws, n).unwrap(), &Mat2::identity()) < 1e-15);
            // Interior layer against raw assembly.
            let raw0 = raw_local(n, &ws, 0);
            let raw1 = raw_local(n, &ws, 1);
            let expect =
                (Mat2::identity() - raw0.r21 * raw1.r12).inv().unwrap();
            assert!(rel_diff(&set.m_plus(1, &ws, n).unwrap(), &expect) < 1e-10);
            let expect =
                (Mat2::identity() - raw1.r12 * raw0.r21).inv().unwrap();
            assert!(rel_diff(&set.m_minus(1, &ws, n).unwrap(), &expect) < 1e-10);
        }
    }

    /// A homogeneous "stack" of identical layers has identity resolvents.
    #[test]
    fn homogeneous_stack_resolvents_are_identity() {
        let stack = LayerStack::new(vec![
            layer(2.0, 0.1, Some(0.1)),
            layer(2.0, 0.1, Some(0.2)),
            layer(2.0, 0.1, None),
        ])
        .unwrap();
        let ws = SpectralWorkspace::new(&stack, OMEGA, C64::new(0.9, 0.4), 3, None);
        let set = CoefficientSet::build(2, &ws).unwrap();
        for j in 0..3 {
            assert!(rel_diff(&set.m_plus(j, &ws, 2).unwrap(), &Mat2::identity()) < 1e-12);
            assert!(rel_diff(&set.m_minus(j, &ws, 2).unwrap(), &Mat2::identity()) < 1e-12);
        }
    }

    /// Extreme-contrast stress: high order and near-evanescent spectral
    /// points on a conductor-to-resistive stack. Raw values here overflow
    /// (the clamp scales hit ±hundreds in log10); the hatted ladder must
    /// stay finite with unity-bounded cross couplings.
    #[test]
    fn extreme_arguments_stay_finite_and_bounded() {
        let stack = LayerStack::new(vec![
            layer(1.0, 1e5, Some(4.0 * crate::INCH)),
            layer(1.0, 1.0, Some(5.5 * crate::INCH)),
            layer(1.0, 0.2, None),
        ])
        .unwrap();
        for &kz in &[
            C64::new(1e-4, 0.0),
            C64::new(50.0, 0.0),
            C64::new(500.0, 20.0),
            C64::new(3.0, 900.0),
        ] {
            let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 100, None);
            for l in 1..=1usize {
                let c = ws.cross(l, 100);
                assert!(c.norm() <= 1.0 + 1e-12, "cross magnitude {} at kz={kz}", c.norm());
            }
            for n in [0usize, 40, 100] {
                let set = CoefficientSet::build(n, &ws).unwrap();
                for m in 0..2 {
                    assert!(set.r_out_gen[m].is_finite(), "n={n} kz={kz} m={m}");
                    assert!(set.r_in_gen[m].is_finite(), "n={n} kz={kz} m={m}");
                }
            }
        }
    }

    /// Deep small-argument interface: hatted values finite while the scale
    /// bookkeeping records hundreds of decades symbolically.
    #[test]
    fn small_argument_interface_scale_bookkeeping() {
        // Tiny radius so k_ρ·a ~ 1e-3 at high order → small class at n=60.
        let stack = LayerStack::new(vec![
            layer(1.0, 1e-6, Some(1e-3)),
            layer(1.0, 1.0, None),
        ])
        .unwrap();
        let ws = SpectralWorkspace::new(&stack, OMEGA, C64::new(1.0, 0.05), 60, None);
        let rt = local_rt_hat(60, &ws, 0).unwrap();
        assert!(rt.r_out_hat.is_finite());
        assert!(rt.t_out_hat.is_finite());
        // log10 |J_60(z)| at |z| ≈ 1e-6·... is far below the raw double
        // range; the scale must carry it (β deeply negative, α = -β).
        assert!(rt.alpha_inner.log_magnitude > 500.0);
        assert_eq!(
            rt.alpha_inner.log_magnitude,
            -rt.alpha_inner.inv().log_magnitude
        );
    }
}
