//! Spectral-domain integrand assembly.
//!
//! For one spectral point `k_z` and one azimuthal order `n`, the coupled
//! axial fields `[E_z; H_z]` radiated by a point dipole are a product of
//! three 2×2 blocks — an observation-side radial bracket `L`, a
//! multiple-reflection middle `M` (plus transmission for cross-layer
//! geometries), and a source-side bracket `R` — applied to a source
//! excitation vector. This module assembles those blocks in hatted
//! (magnitude-conditioned) form, folds positive and negative orders
//! analytically, extracts the transverse components, and provides the
//! near-field direct-term subtraction with its closed-form counterpart.
//!
//! Everything here is pure per `(n, k_z)`; quadrature, adaptivity, and the
//! magnetic-source duality mapping live in the solver layer.

use crate::coefficients::{
    generalized_transmission, CoefficientSet, SpectralWorkspace,
};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::medium::LayerStack;
use crate::special::{conditioned_table, ConditionedQuad};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Relative placement of observation and source radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    /// Same layer, observation at or outside the source radius.
    Case1,
    /// Same layer, observation inside the source radius.
    Case2,
    /// Observation layer outside the source layer.
    Case3,
    /// Observation layer inside the source layer.
    Case4,
}

/// Deterministic case selection. Radii exactly on an interface follow the
/// layer-assignment conventions: a source belongs to the inner layer, an
/// observation point to the outer; an exact radius tie in the same layer
/// is Case 1.
pub fn classify_case(stack: &LayerStack, rho: f64, rho_src: f64) -> CaseId {
    let i = stack.layer_of_observation(rho);
    let j = stack.layer_of_source(rho_src);
    if i == j {
        if rho >= rho_src {
            CaseId::Case1
        } else {
            CaseId::Case2
        }
    } else if i > j {
        CaseId::Case3
    } else {
        CaseId::Case4
    }
}

/// One evaluation point bound to its layer, with the conditioned function
/// table at that radius.
pub struct LayerPoint {
    pub layer: usize,
    pub rho: f64,
    pub quads: Vec<ConditionedQuad>,
}

impl LayerPoint {
    pub fn new(ws: &SpectralWorkspace, layer: usize, rho: f64) -> Self {
        LayerPoint {
            layer,
            rho,
            quads: ws.quads_at(layer, rho),
        }
    }
}

/// The dipole excitation split into its three structural terms:
/// a direct term `d1`, a mode-linear term `d2` (carries the factor `n`
/// and `1/ρ'`), and `d3` multiplying `∂/∂ρ'` of the source-side bracket.
#[derive(Debug, Clone, Copy)]
pub struct SourceFactor {
    pub d1: [C64; 2],
    pub d2: [C64; 2],
    pub d3: [C64; 2],
}

/// Excitation vectors for a unit electric dipole with cylindrical
/// orientation components `(α_ρ', α_φ', α_z')` at radius `ρ'` in a layer
/// with permittivity `eps_src`. Magnetic dipoles are handled upstream by
/// duality.
pub fn source_factor(
    n: usize,
    k_z: C64,
    k_rho_src: C64,
    eps_src: C64,
    omega: f64,
    rho_src: f64,
    orientation: [f64; 3],
) -> SourceFactor {
    let nf = n as f64;
    let [a_rho, a_phi, a_z] = orientation;
    SourceFactor {
        d1: [k_rho_src * k_rho_src * a_z, ZERO],
        d2: [
            k_z * (-nf * a_phi / rho_src),
            eps_src * (-nf * omega * a_rho / rho_src),
        ],
        d3: [-I * k_z * a_rho, I * omega * eps_src * a_phi],
    }
}

/// The assembled hatted factorization `F̄n = scalar · L·M·R` together with
/// the analytic radial derivatives of both end brackets. `scalar` collects
/// every cross-radius scale pairing; each pairing is bounded by unity, so
/// `|scalar| ≤ 1` and the matrix parts never see the raw magnitudes.
pub struct DecomposedIntegrand {
    pub scalar: C64,
    pub l: Mat2,
    /// `∂L/∂ρ` (hatted derivative functions, same bounded factors).
    pub dl: Mat2,
    pub m: Mat2,
    pub r: Mat2,
    /// `∂R/∂ρ'`.
    pub dr: Mat2,
}

/// The four materialized products the field assembly needs: plain, source
/// derivative, observation derivative, and both.
#[derive(Debug, Clone, Copy)]
pub struct GBlocks {
    pub g: Mat2,
    pub gp: Mat2,
    pub gd: Mat2,
    pub gdp: Mat2,
}

impl std::ops::Sub for GBlocks {
    type Output = GBlocks;
    fn sub(self, o: GBlocks) -> GBlocks {
        GBlocks {
            g: self.g - o.g,
            gp: self.gp - o.gp,
            gd: self.gd - o.gd,
            gdp: self.gdp - o.gdp,
        }
    }
}

impl DecomposedIntegrand {
    pub fn blocks(&self) -> GBlocks {
        let lm = (self.l * self.m).scale(self.scalar);
        let dlm = (self.dl * self.m).scale(self.scalar);
        GBlocks {
            g: lm * self.r,
            gp: lm * self.dr,
            gd: dlm * self.r,
            gdp: dlm * self.dr,
        }
    }
}

/// Outgoing-type bracket at a point of layer `l`:
/// `Ĥ I + (β(ρ)α(a_l))² Ĵ r̃_out(l)` and its `∂/∂ρ` (already times `k_ρ`).
/// In the outermost layer the reflection term is absent.
fn h_bracket(
    n: usize,
    ws: &SpectralWorkspace,
    set: &CoefficientSet,
    l: usize,
    q: &ConditionedQuad,
) -> (Mat2, Mat2) {
    let k_rho = ws.k_rho[l];
    if l < ws.stack.interface_count() {
        let c = q
            .beta
            .mul(ws.quad_outer(l, n).alpha)
            .squared()
            .to_complex_bounded();
        let refl = set.r_out_gen[l];
        let b = Mat2::identity().scale(q.h_hat) + refl.scale(c * q.j_hat);
        let db =
            (Mat2::identity().scale(q.hp_hat) + refl.scale(c * q.jp_hat)).scale(k_rho);
        (b, db)
    } else {
        (
            Mat2::identity().scale(q.h_hat),
            Mat2::identity().scale(q.hp_hat * k_rho),
        )
    }
}

/// Standing-type bracket at a point of layer `l`:
/// `Ĵ I + (β(a_{l-1})α(ρ))² Ĥ r̃_in(l-1)` and its `∂/∂ρ`. In the axis
/// layer the reflection term is absent.
fn j_bracket(
    n: usize,
    ws: &SpectralWorkspace,
    set: &CoefficientSet,
    l: usize,
    q: &ConditionedQuad,
) -> (Mat2, Mat2) {
    let k_rho = ws.k_rho[l];
    if l > 0 {
        let c = ws
            .quad_inner(l, n)
            .beta
            .mul(q.alpha)
            .squared()
            .to_complex_bounded();
        let refl = set.r_in_gen[l - 1];
        let b = Mat2::identity().scale(q.j_hat) + refl.scale(c * q.h_hat);
        let db =
            (Mat2::identity().scale(q.jp_hat) + refl.scale(c * q.hp_hat)).scale(k_rho);
        (b, db)
    } else {
        (
            Mat2::identity().scale(q.j_hat),
            Mat2::identity().scale(q.jp_hat * k_rho),
        )
    }
}

/// Assemble the conditioned factorization for one order. The scalar
/// pairings follow the case structure exactly; regrouping them would break
/// the unit-boundedness that makes the factorization overflow-free.
pub fn assemble_fn(
    case: CaseId,
    n: usize,
    ws: &SpectralWorkspace,
    set: &CoefficientSet,
    obs: &LayerPoint,
    src: &LayerPoint,
) -> Result<DecomposedIntegrand> {
    let (i_obs, j_src) = (obs.layer, src.layer);
    let qo = &obs.quads[n];
    let qs = &src.quads[n];
    match case {
        CaseId::Case1 => {
            let (l, dl) = h_bracket(n, ws, set, i_obs, qo);
            let (r, dr) = j_bracket(n, ws, set, j_src, qs);
            Ok(DecomposedIntegrand {
                scalar: qs.beta.mul(qo.alpha).to_complex_bounded(),
                l,
                dl,
                m: set.m_plus(j_src, ws, n)?,
                r,
                dr,
            })
        }
        CaseId::Case2 => {
            let (l, dl) = j_bracket(n, ws, set, i_obs, qo);
            let (r, dr) = h_bracket(n, ws, set, j_src, qs);
            Ok(DecomposedIntegrand {
                scalar: qo.beta.mul(qs.alpha).to_complex_bounded(),
                l,
                dl,
                m: set.m_minus(j_src, ws, n)?,
                r,
                dr,
            })
        }
        CaseId::Case3 => {
            let (l, dl) = h_bracket(n, ws, set, i_obs, qo);
            let (r, dr) = j_bracket(n, ws, set, j_src, qs);
            let t = generalized_transmission(n, ws, set, j_src, i_obs)?;
            let m = set.n_plus(i_obs, ws, n)? * t.t_hat * set.m_plus(j_src, ws, n)?;
            let lead = t.lead.mul(qo.alpha).to_complex_bounded();
            let trail = qs.beta.mul(t.trail).to_complex_bounded();
            Ok(DecomposedIntegrand {
                scalar: lead * trail,
                l,
                dl,
                m,
                r,
                dr,
            })
        }
        CaseId::Case4 => {
            let (l, dl) = j_bracket(n, ws, set, i_obs, qo);
            let (r, dr) = h_bracket(n, ws, set, j_src, qs);
            let t = generalized_transmission(n, ws, set, j_src, i_obs)?;
            let m = set.n_minus(i_obs, ws, n)? * t.t_hat * set.m_minus(j_src, ws, n)?;
            let lead = qo.beta.mul(t.lead).to_complex_bounded();
            let trail = t.trail.mul(qs.alpha).to_complex_bounded();
            Ok(DecomposedIntegrand {
                scalar: lead * trail,
                l,
                dl,
                m,
                r,
                dr,
            })
        }
    }
}

/// The primary-field part of the same-layer integrand: the case
/// factorization with every generalized reflection set to zero. Only
/// meaningful when source and observation share a layer.
pub fn direct_term(
    case: CaseId,
    n: usize,
    ws: &SpectralWorkspace,
    obs: &LayerPoint,
    src: &LayerPoint,
) -> DecomposedIntegrand {
    assert!(
        matches!(case, CaseId::Case1 | CaseId::Case2),
        "direct term exists only for same-layer geometries"
    );
    let k_rho = ws.k_rho[obs.layer];
    let qo = &obs.quads[n];
    let qs = &src.quads[n];
    let (lf, dlf, rf, drf, scalar) = match case {
        CaseId::Case1 => (
            qo.h_hat,
            qo.hp_hat,
            qs.j_hat,
            qs.jp_hat,
            qs.beta.mul(qo.alpha).to_complex_bounded(),
        ),
        _ => (
            qo.j_hat,
            qo.jp_hat,
            qs.h_hat,
            qs.hp_hat,
            qo.beta.mul(qs.alpha).to_complex_bounded(),
        ),
    };
    DecomposedIntegrand {
        scalar,
        l: Mat2::identity().scale(lf),
        dl: Mat2::identity().scale(dlf * k_rho),
        m: Mat2::identity(),
        r: Mat2::identity().scale(rf),
        dr: Mat2::identity().scale(drf * k_rho),
    }
}

/// Decide whether the direct term is worth subtracting: compare the
/// highest-order direct magnitude `|H'_n(k_ρρ)·J_n(k_ρρ')|` against the
/// order-0 one, in log space. Below a 1e-20 ratio the mode series has
/// already buried the direct term and subtraction would only add work.
pub fn subtraction_decision(
    case: CaseId,
    n_max: usize,
    k_rho: C64,
    rho: f64,
    rho_src: f64,
) -> bool {
    assert!(
        matches!(case, CaseId::Case1 | CaseId::Case2),
        "subtraction applies only to same-layer geometries"
    );
    use crate::special::reference;
    let (z_obs, z_src) = (k_rho * rho, k_rho * rho_src);
    let ht = reference::hankel1_table(n_max + 1, z_obs);
    let jt = reference::bessel_j_table(n_max + 1, z_src);
    let log_at = |n: usize| {
        reference::derivative_from_table(&ht, n, z_obs).log_abs() + jt[n].log_abs()
    };
    log_at(n_max) - log_at(0) >= -20.0 * std::f64::consts::LN_10
}

/// How the entries of a 2×2 mode block react to negating the order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPattern {
    /// Off-diagonal entries flip sign under `n → −n` (axial and radial
    /// component sums).
    OffDiagFlips,
    /// Diagonal entries flip sign (azimuthal component sums).
    DiagFlips,
}

/// Whether the term's scalar coefficients are even or odd in `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermParity {
    Even,
    Odd,
}

/// Combine the `+n` and `−n` contributions of one mode block analytically:
/// entries that keep their sign pair into `2·cos(nψ)`, entries that flip
/// pair into `2i·sin(nψ)`. The `n = 0` term is returned unpaired.
pub fn fold_block(
    b: &Mat2,
    n: usize,
    psi: f64,
    pattern: SignPattern,
    parity: TermParity,
) -> Mat2 {
    if n == 0 {
        return *b;
    }
    let (mut sd, mut so) = match pattern {
        SignPattern::OffDiagFlips => (1.0, -1.0),
        SignPattern::DiagFlips => (-1.0, 1.0),
    };
    if parity == TermParity::Odd {
        sd = -sd;
        so = -so;
    }
    let np = n as f64 * psi;
    let even = C64::new(2.0 * np.cos(), 0.0);
    let odd = C64::new(0.0, 2.0 * np.sin());
    let cd = if sd > 0.0 { even } else { odd };
    let co = if so > 0.0 { even } else { odd };
    Mat2::new(
        cd * b.m[0][0],
        co * b.m[0][1],
        co * b.m[1][0],
        cd * b.m[1][1],
    )
}

/// One spectral point of the mode-summed integrand, per field family.
/// `axial` is `[E_z; H_z]`-proportional; `radial` and `azimuthal` carry
/// their `1/k²_ρ` observation-layer prefactor already. The caller still
/// owes the axial phase `e^{ik_z(z−z')}`, the quadrature weight, and the
/// global source prefactor.
#[derive(Debug, Clone, Copy)]
pub struct SpectralSample {
    pub axial: [C64; 2],
    pub radial: [C64; 2],
    pub azimuthal: [C64; 2],
}

/// Fixed (per-job) geometry and source data for spectral sampling.
pub struct SampleRequest<'a> {
    pub stack: &'a LayerStack,
    pub omega: f64,
    pub n_max: usize,
    /// Observation radius.
    pub rho: f64,
    /// Source radius.
    pub rho_src: f64,
    /// Azimuth difference `φ − φ'`.
    pub psi: f64,
    /// Electric-dipole orientation `(α_ρ', α_φ', α_z')`.
    pub orientation: [f64; 3],
    /// Subtract the same-layer direct term blockwise (the closed-form
    /// direct field is then added back after integration).
    pub subtract_direct: bool,
}

fn add2(acc: &mut [C64; 2], v: [C64; 2]) {
    acc[0] += v[0];
    acc[1] += v[1];
}

/// Evaluate the fully mode-summed integrand at one `k_z`. Radial
/// wavenumbers may be overridden with sheet-tracked values.
pub fn spectral_sample(
    req: &SampleRequest,
    k_z: C64,
    k_rho_override: Option<&[C64]>,
) -> Result<SpectralSample> {
    let ws = SpectralWorkspace::new(req.stack, req.omega, k_z, req.n_max, k_rho_override);
    if ws.k_rho.iter().any(|k| k.norm() == 0.0) {
        return Err(Error::BranchPointNode(k_z));
    }
    let i_obs = req.stack.layer_of_observation(req.rho);
    let j_src = req.stack.layer_of_source(req.rho_src);
    let case = classify_case(req.stack, req.rho, req.rho_src);
    let obs = LayerPoint::new(&ws, i_obs, req.rho);
    let src = LayerPoint::new(&ws, j_src, req.rho_src);
    let (eps_i, mu_i) = (ws.eps[i_obs], ws.mu[i_obs]);
    let subtract =
        req.subtract_direct && matches!(case, CaseId::Case1 | CaseId::Case2);

    let mut axial = [ZERO; 2];
    let mut radial = [ZERO; 2];
    let mut azimuthal = [ZERO; 2];

    use SignPattern::{DiagFlips, OffDiagFlips};
    use TermParity::{Even, Odd};

    for n in 0..=req.n_max {
        let set = CoefficientSet::build(n, &ws)?;
        let mut b = assemble_fn(case, n, &ws, &set, &obs, &src)?.blocks();
        if subtract {
            b = b - direct_term(case, n, &ws, &obs, &src).blocks();
        }
        let sf = source_factor(
            n,
            k_z,
            ws.k_rho[j_src],
            ws.eps[j_src],
            req.omega,
            req.rho_src,
            req.orientation,
        );
        let nf = n as f64;

        add2(&mut axial, fold_block(&b.g, n, req.psi, OffDiagFlips, Even).mul_vec(sf.d1));
        add2(&mut axial, fold_block(&b.g, n, req.psi, OffDiagFlips, Odd).mul_vec(sf.d2));
        add2(&mut axial, fold_block(&b.gp, n, req.psi, OffDiagFlips, Even).mul_vec(sf.d3));

        // Radial extraction: i·k_z·∂ρ plus the mode-coupling antidiagonal.
        // The antidiagonal coefficient is odd in n but anticommutes with
        // the order-negation conjugation, so the combined block folds with
        // the source term's own parity.
        let a_mat = Mat2::new(ZERO, mu_i * (-nf), eps_i * nf, ZERO)
            .scale(C64::new(req.omega / req.rho, 0.0));
        let wr = b.gd.scale(I * k_z) + a_mat * b.g;
        let wrp = b.gdp.scale(I * k_z) + a_mat * b.gp;
        add2(&mut radial, fold_block(&wr, n, req.psi, OffDiagFlips, Even).mul_vec(sf.d1));
        add2(&mut radial, fold_block(&wr, n, req.psi, OffDiagFlips, Odd).mul_vec(sf.d2));
        add2(&mut radial, fold_block(&wrp, n, req.psi, OffDiagFlips, Even).mul_vec(sf.d3));

        // Azimuthal extraction: −(n k_z/ρ) plus iω·antidiagonal·∂ρ; here
        // the diagonal entries flip under order negation.
        let b_mat = Mat2::new(ZERO, -mu_i, eps_i, ZERO).scale(I * req.omega);
        let wf = b.g.scale(k_z * (-nf / req.rho)) + b_mat * b.gd;
        let wfp = b.gp.scale(k_z * (-nf / req.rho)) + b_mat * b.gdp;
        add2(&mut azimuthal, fold_block(&wf, n, req.psi, DiagFlips, Even).mul_vec(sf.d1));
        add2(&mut azimuthal, fold_block(&wf, n, req.psi, DiagFlips, Odd).mul_vec(sf.d2));
        add2(&mut azimuthal, fold_block(&wfp, n, req.psi, DiagFlips, Even).mul_vec(sf.d3));
    }

    let kr2 = ws.k_rho[i_obs] * ws.k_rho[i_obs];
    for v in radial.iter_mut().chain(azimuthal.iter_mut()) {
        *v /= kr2;
    }
    Ok(SpectralSample {
        axial,
        radial,
        azimuthal,
    })
}

/// Closed-form fields of a point dipole in an unbounded homogeneous
/// medium, e^{−iωt} convention. Orientation is given in cylindrical
/// components at the source point; the result is in cylindrical components
/// at the observation point, ordered `(ρ, φ, z)`.
#[allow(clippy::too_many_arguments)]
pub fn closed_form_direct(
    magnetic: bool,
    moment: f64,
    orientation: [f64; 3],
    src: [f64; 3],
    obs: [f64; 3],
    eps: C64,
    mu: C64,
    omega: f64,
) -> ([C64; 3], [C64; 3]) {
    let [rs, ps, zs] = src;
    let [ro, po, zo] = obs;
    let [ar, ap, az] = orientation;
    let alpha = [
        ar * ps.cos() - ap * ps.sin(),
        ar * ps.sin() + ap * ps.cos(),
        az,
    ];
    let d = [
        ro * po.cos() - rs * ps.cos(),
        ro * po.sin() - rs * ps.sin(),
        zo - zs,
    ];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    assert!(r > 0.0, "observation point coincides with the source");
    let rhat = [d[0] / r, d[1] / r, d[2] / r];

    let mut k = (mu * eps).sqrt() * omega;
    if k.re < 0.0 {
        k = -k;
    }
    let kr = k * r;
    let green = (I * kr).exp() / (4.0 * std::f64::consts::PI * r);
    let near = 1.0 / kr;
    let a_c = C64::new(1.0, 0.0) + I * near - near * near;
    let b_c = -C64::new(1.0, 0.0) - 3.0 * I * near + 3.0 * near * near;
    let ra = rhat[0] * alpha[0] + rhat[1] * alpha[1] + rhat[2] * alpha[2];
    let polar: Vec<C64> = (0..3)
        .map(|i| (a_c * alpha[i] + b_c * ra * rhat[i]) * green)
        .collect();
    let cross = [
        rhat[1] * alpha[2] - rhat[2] * alpha[1],
        rhat[2] * alpha[0] - rhat[0] * alpha[2],
        rhat[0] * alpha[1] - rhat[1] * alpha[0],
    ];
    let curl_amp = (I * k - 1.0 / r) * green * moment;

    let mut e_cart = [ZERO; 3];
    let mut h_cart = [ZERO; 3];
    for i in 0..3 {
        if magnetic {
            h_cart[i] = I * omega * eps * moment * polar[i];
            e_cart[i] = -curl_amp * cross[i];
        } else {
            e_cart[i] = I * omega * mu * moment * polar[i];
            h_cart[i] = curl_amp * cross[i];
        }
    }

    let er = [po.cos(), po.sin(), 0.0];
    let ep = [-po.sin(), po.cos(), 0.0];
    let project = |v: &[C64; 3]| {
        [
            v[0] * er[0] + v[1] * er[1],
            v[0] * ep[0] + v[1] * ep[1],
            v[2],
        ]
    };
    (project(&e_cart), project(&h_cart))
}

/// Log-magnitude of the order-`n` direct product `|H'_n(kρ·ρ)·J_n(kρ·ρ')|`
/// via the conditioned tables; exposed for path-probe diagnostics.
pub fn direct_magnitude_log(n: usize, k_rho: C64, rho: f64, rho_src: f64) -> f64 {
    let to = conditioned_table(n, k_rho * rho);
    let ts = conditioned_table(n, k_rho * rho_src);
    let qo = &to[n];
    let qs = &ts[n];
    qo.hp_hat.norm().ln()
        + qo.alpha.log_magnitude
        + qs.j_hat.norm().ln()
        + qs.beta.log_magnitude
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

    #[test]
    fn case_classification() {
        let stack = LayerStack::new(vec![
            layer(1.0, 0.1, Some(0.1)),
            layer(1.0, 0.2, Some(0.2)),
            layer(1.0, 0.3, Some(0.3)),
            layer(1.0, 0.4, None),
        ])
        .unwrap();
        assert_eq!(classify_case(&stack, 0.15, 0.15), CaseId::Case1);
        assert_eq!(classify_case(&stack, 0.18, 0.15), CaseId::Case1);
        assert_eq!(classify_case(&stack, 0.12, 0.15), CaseId::Case2);
        assert_eq!(classify_case(&stack, 0.35, 0.15), CaseId::Case3);
        assert_eq!(classify_case(&stack, 0.15, 0.35), CaseId::Case4);
        // On-interface conventions: source joins the inner layer,
        // observation the outer, so an exactly-shared radius is Case 3.
        assert_eq!(classify_case(&stack, 0.1, 0.1), CaseId::Case3);
    }

    #[test]
    fn source_factor_orientations() {
        let (k_z, k_rho, eps) = (
            C64::new(0.4, 0.1),
            C64::new(0.9, 0.3),
            C64::new(2e-11, 5e-7),
        );
        let (rho_src, n) = (0.13, 7);
        let z = source_factor(n, k_z, k_rho, eps, OMEGA, rho_src, [0.0, 0.0, 1.0]);
        assert_eq!(z.d1[0], k_rho * k_rho);
        assert_eq!(z.d1[1], ZERO);
        assert_eq!(z.d2, [ZERO, ZERO]);
        assert_eq!(z.d3, [ZERO, ZERO]);

        let p = source_factor(n, k_z, k_rho, eps, OMEGA, rho_src, [0.0, 1.0, 0.0]);
        assert_eq!(p.d1, [ZERO, ZERO]);
        assert_eq!(p.d2[0], k_z * (-7.0 / rho_src));
        assert_eq!(p.d2[1], ZERO);
        assert_eq!(p.d3[0], ZERO);
        assert_eq!(p.d3[1], I * OMEGA * eps);

        let r = source_factor(n, k_z, k_rho, eps, OMEGA, rho_src, [1.0, 0.0, 0.0]);
        assert_eq!(r.d2[0], ZERO);
        assert_eq!(r.d2[1], eps * (-7.0 * OMEGA / rho_src));
        assert_eq!(r.d3[0], -I * k_z);
        assert_eq!(r.d3[1], ZERO);
    }

    /// In a homogeneous (single-layer) medium the factorization collapses
    /// to the outgoing/regular product; at small arguments its (1,1)
    /// element is −i/(nπ)·(ρ'/ρ)^n, and at moderate arguments it must
    /// equal the raw product H_n(kρ)·J_n(kρ').
    #[test]
    fn homogeneous_mode_shape() {
        let stack = LayerStack::new(vec![layer(1.0, 1e-9, None)]).unwrap();
        // Small-argument regime: k_ρ ≈ i·k_z with k_z tiny.
        let ws = SpectralWorkspace::new(&stack, OMEGA, C64::new(1e-3, 0.0), 8, None);
        let set = CoefficientSet::build(5, &ws).unwrap();
        let obs = LayerPoint::new(&ws, 0, 0.1);
        let src = LayerPoint::new(&ws, 0, 0.05);
        let di = assemble_fn(CaseId::Case1, 5, &ws, &set, &obs, &src).unwrap();
        let got = di.blocks().g.m[0][0];
        let expect = -I / (5.0 * std::f64::consts::PI) * (0.05f64 / 0.1).powi(5);
        assert!((got - expect).norm() / expect.norm() < 1e-9, "{got} vs {expect}");

        // Moderate regime against raw reference values.
        let kz = C64::new(2.0, 1.0);
        let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 8, None);
        let set = CoefficientSet::build(3, &ws).unwrap();
        let obs = LayerPoint::new(&ws, 0, 0.8);
        let src = LayerPoint::new(&ws, 0, 0.3);
        let di = assemble_fn(CaseId::Case1, 3, &ws, &set, &obs, &src).unwrap();
        let g = di.blocks().g;
        let k_rho = ws.k_rho[0];
        let h = reference::hankel1(3, k_rho * 0.8).value();
        let j = reference::bessel_j(3, k_rho * 0.3).value();
        let expect = h * j;
        assert!((g.m[0][0] - expect).norm() / expect.norm() < 1e-10);
        assert!(g.m[0][1].norm() < 1e-300);
        // Zero interfaces means assemble and direct term coincide.
        let d0 = direct_term(CaseId::Case1, 3, &ws, &obs, &src);
        assert!((d0.blocks().g.m[0][0] - g.m[0][0]).norm() <= 1e-16 * g.m[0][0].norm());
    }

    // ----- raw-assembly oracle for all four cases -----

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

    fn coupling_raw(
        n: usize,
        f: C64,
        fp: C64,
        ws: &SpectralWorkspace,
        l: usize,
        rho: f64,
    ) -> Mat2 {
        let k = ws.k_rho[l];
        let off = -C64::new(n as f64, 0.0) * ws.k_z * f / (k * k * rho);
        Mat2::new(
            I * ws.omega * ws.eps[l] * fp / k,
            off,
            off,
            -I * ws.omega * ws.mu[l] * fp / k,
        )
    }

    fn raw_local(n: usize, ws: &SpectralWorkspace, m: usize) -> RawLocal {
        let a = ws.stack.interface_radius(m);
        let (l1, l2) = (m, m + 1);
        let (j1, jp1, h1, hp1) = raw_quad(n, ws.k_rho[l1] * a);
        let (j2, jp2, h2, hp2) = raw_quad(n, ws.k_rho[l2] * a);
        let jm1 = coupling_raw(n, j1, jp1, ws, l1, a);
        let hm1 = coupling_raw(n, h1, hp1, ws, l1, a);
        let jm2 = coupling_raw(n, j2, jp2, ws, l2, a);
        let hm2 = coupling_raw(n, h2, hp2, ws, l2, a);
        let d_inv = (jm1.scale(h2) - hm2.scale(j1)).inv().unwrap();
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

    /// Raw generalized ladders for a 3-layer stack.
    fn raw_ladders(n: usize, ws: &SpectralWorkspace) -> (Vec<RawLocal>, Vec<Mat2>, Vec<Mat2>) {
        let ni = ws.stack.interface_count();
        let raws: Vec<RawLocal> = (0..ni).map(|m| raw_local(n, ws, m)).collect();
        let mut rg_out = vec![Mat2::ZERO; ni];
        rg_out[ni - 1] = raws[ni - 1].r12;
        for m in (0..ni - 1).rev() {
            let b = (Mat2::identity() - raws[m].r21 * rg_out[m + 1]).inv().unwrap();
            rg_out[m] = raws[m].r12 + raws[m].t21 * rg_out[m + 1] * b * raws[m].t12;
        }
        let mut rg_in = vec![Mat2::ZERO; ni];
        rg_in[0] = raws[0].r21;
        for m in 1..ni {
            let b = (Mat2::identity() - raws[m].r12 * rg_in[m - 1]).inv().unwrap();
            rg_in[m] = raws[m].r21 + raws[m].t12 * rg_in[m - 1] * b * raws[m].t21;
        }
        (raws, rg_out, rg_in)
    }

    fn rel_diff(a: &Mat2, b: &Mat2) -> f64 {
        ((*a - *b).max_norm()) / a.max_norm().max(b.max_norm()).max(1e-300)
    }

    #[test]
    fn four_cases_match_raw_assembly() {
        let stack = benign_three();
        let ni = stack.interface_count();
        for &kz in &[C64::new(0.5, 0.2), C64::new(1.8, 0.7)] {
            let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 5, None);
            for n in [0usize, 2, 5] {
                let set = CoefficientSet::build(n, &ws).unwrap();
                let (raws, rg_out, rg_in) = raw_ladders(n, &ws);
                let bracket_out = |l: usize, rho: f64| -> Mat2 {
                    let (j, _, h, _) = raw_quad(n, ws.k_rho[l] * rho);
                    let mut b = Mat2::identity().scale(h);
                    if l < ni {
                        b = b + rg_out[l].scale(j);
                    }
                    b
                };
                let bracket_in = |l: usize, rho: f64| -> Mat2 {
                    let (j, _, h, _) = raw_quad(n, ws.k_rho[l] * rho);
                    let mut b = Mat2::identity().scale(j);
                    if l > 0 {
                        b = b + rg_in[l - 1].scale(h);
                    }
                    b
                };
                let check = |case: CaseId, rho: f64, rho_src: f64, expect: Mat2| {
                    let obs = LayerPoint::new(&ws, stack.layer_of_observation(rho), rho);
                    let src = LayerPoint::new(&ws, stack.layer_of_source(rho_src), rho_src);
                    let got = assemble_fn(case, n, &ws, &set, &obs, &src)
                        .unwrap()
                        .blocks()
                        .g;
                    assert!(
                        rel_diff(&got, &expect) < 1e-10,
                        "{case:?} n={n} kz={kz}: rel {}",
                        rel_diff(&got, &expect)
                    );
                };

                // Case 1: both in layer 1.
                let m_p = (Mat2::identity() - rg_in[0] * rg_out[1]).inv().unwrap();
                check(
                    CaseId::Case1,
                    0.14,
                    0.12,
                    bracket_out(1, 0.14) * m_p * bracket_in(1, 0.12),
                );
                // Case 2: observation inside the source radius.
                let m_m = (Mat2::identity() - rg_out[1] * rg_in[0]).inv().unwrap();
                check(
                    CaseId::Case2,
                    0.12,
                    0.14,
                    bracket_in(1, 0.12) * m_m * bracket_out(1, 0.14),
                );
                // Case 3: source layer 0 → observation layer 2 (one
                // transit). Layer 2 is outermost, so its observation-side
                // resolvent is the identity and the bracket has no
                // reflected part.
                let t_full = raws[1].t12
                    * ((Mat2::identity() - raws[0].r21 * rg_out[1]).inv().unwrap()
                        * raws[0].t12);
                let m_p0 = Mat2::identity(); // source layer 0 has no inner side
                check(
                    CaseId::Case3,
                    0.30,
                    0.05,
                    bracket_out(2, 0.30) * t_full * m_p0 * bracket_in(0, 0.05),
                );
                // Case 3 adjacent: source layer 1 → observation layer 2.
                let m_p1 = (Mat2::identity() - rg_in[0] * rg_out[1]).inv().unwrap();
                check(
                    CaseId::Case3,
                    0.30,
                    0.12,
                    bracket_out(2, 0.30) * raws[1].t12 * m_p1 * bracket_in(1, 0.12),
                );
                // Case 4: source layer 2 → observation layer 0 (one transit).
                let n1m = (Mat2::identity() - raws[1].r12 * rg_in[0]).inv().unwrap();
                let t_in_full = raws[0].t21 * (n1m * raws[1].t21);
                check(
                    CaseId::Case4,
                    0.05,
                    0.30,
                    bracket_in(0, 0.05) * t_in_full * bracket_out(2, 0.30),
                );
                // Case 4 adjacent: source layer 1 → observation layer 0.
                let m_m1 = (Mat2::identity() - rg_out[1] * rg_in[0]).inv().unwrap();
                check(
                    CaseId::Case4,
                    0.05,
                    0.12,
                    bracket_in(0, 0.05) * raws[0].t21 * m_m1 * bracket_out(1, 0.12),
                );
            }
        }
    }

    /// Tangential spectral components must be continuous across material
    /// interfaces; this exercises the local operators, both generalized
    /// ladders, the transmission chains, and all four case assemblies in
    /// one physical statement.
    #[test]
    fn tangential_components_continuous_across_interfaces() {
        let stack = benign_three();
        let req = |rho: f64| SampleRequest {
            stack: &stack,
            omega: OMEGA,
            n_max: 6,
            rho,
            rho_src: 0.12,
            psi: 0.37,
            orientation: [0.5, 0.6, 0.4],
            subtract_direct: false,
        };
        for &kz in &[C64::new(0.6, 0.2), C64::new(1.2, 0.9)] {
            for &a in &[0.10, 0.16] {
                let eps = 1e-9 * a;
                let inner = spectral_sample(&req(a - eps), kz, None).unwrap();
                let outer = spectral_sample(&req(a + eps), kz, None).unwrap();
                for c in 0..2 {
                    let (vi, vo) = (inner.axial[c], outer.axial[c]);
                    assert!(
                        (vi - vo).norm() / vi.norm().max(vo.norm()) < 1e-6,
                        "axial[{c}] at a={a} kz={kz}: {vi} vs {vo}"
                    );
                    let (vi, vo) = (inner.azimuthal[c], outer.azimuthal[c]);
                    assert!(
                        (vi - vo).norm() / vi.norm().max(vo.norm()) < 1e-6,
                        "azimuthal[{c}] at a={a} kz={kz}: {vi} vs {vo}"
                    );
                }
            }
        }
    }

    /// The folded ± order combination must equal a brute-force sum over
    /// explicitly negated orders.
    #[test]
    fn folded_sum_matches_brute_force() {
        let stack = benign_three();
        let n_max = 6;
        let (rho, rho_src, psi) = (0.14, 0.12, 0.7);
        let orientation = [0.6, 0.8, 0.5];
        let kz = C64::new(0.9, 0.4);
        let req = SampleRequest {
            stack: &stack,
            omega: OMEGA,
            n_max,
            rho,
            rho_src,
            psi,
            orientation,
            subtract_direct: false,
        };
        let folded = spectral_sample(&req, kz, None).unwrap();

        // Brute force: loop signed orders, conjugating blocks by
        // S = diag(1,−1) and negating every explicit factor of n.
        let ws = SpectralWorkspace::new(&stack, OMEGA, kz, n_max, None);
        let obs = LayerPoint::new(&ws, 1, rho);
        let src = LayerPoint::new(&ws, 1, rho_src);
        let (eps_i, mu_i) = (ws.eps[1], ws.mu[1]);
        let s_conj = |m: &Mat2| {
            Mat2::new(m.m[0][0], -m.m[0][1], -m.m[1][0], m.m[1][1])
        };
        let mut axial = [ZERO; 2];
        let mut radial = [ZERO; 2];
        let mut azimuthal = [ZERO; 2];
        for sn in -(n_max as i64)..=(n_max as i64) {
            let n = sn.unsigned_abs() as usize;
            let set = CoefficientSet::build(n, &ws).unwrap();
            let b = assemble_fn(CaseId::Case1, n, &ws, &set, &obs, &src)
                .unwrap()
                .blocks();
            let (g, gp, gd, gdp) = if sn >= 0 {
                (b.g, b.gp, b.gd, b.gdp)
            } else {
                (s_conj(&b.g), s_conj(&b.gp), s_conj(&b.gd), s_conj(&b.gdp))
            };
            let nf = sn as f64;
            let phase = C64::new(0.0, nf * psi).exp();
            let sf0 = source_factor(n, kz, ws.k_rho[1], ws.eps[1], OMEGA, rho_src, orientation);
            let sign = if sn >= 0 { 1.0 } else { -1.0 };
            let d1 = sf0.d1;
            let d2 = [sf0.d2[0] * sign, sf0.d2[1] * sign];
            let d3 = sf0.d3;
            let dsum = |m: &Mat2, d: [C64; 2]| m.mul_vec(d);

            for (m, d) in [(&g, d1), (&g, d2), (&gp, d3)] {
                let v = dsum(m, d);
                axial[0] += phase * v[0];
                axial[1] += phase * v[1];
            }
            let a_mat = Mat2::new(ZERO, mu_i * (-nf), eps_i * nf, ZERO)
                .scale(C64::new(OMEGA / rho, 0.0));
            let wr = gd.scale(I * kz) + a_mat * g;
            let wrp = gdp.scale(I * kz) + a_mat * gp;
            for (m, d) in [(&wr, d1), (&wr, d2), (&wrp, d3)] {
                let v = dsum(m, d);
                radial[0] += phase * v[0];
                radial[1] += phase * v[1];
            }
            let b_mat = Mat2::new(ZERO, -mu_i, eps_i, ZERO).scale(I * OMEGA);
            let wf = g.scale(kz * (-nf / rho)) + b_mat * gd;
            let wfp = gp.scale(kz * (-nf / rho)) + b_mat * gdp;
            for (m, d) in [(&wf, d1), (&wf, d2), (&wfp, d3)] {
                let v = dsum(m, d);
                azimuthal[0] += phase * v[0];
                azimuthal[1] += phase * v[1];
            }
        }
        let kr2 = ws.k_rho[1] * ws.k_rho[1];
        for v in radial.iter_mut().chain(azimuthal.iter_mut()) {
            *v /= kr2;
        }
        for c in 0..2 {
            for (got, want) in [
                (folded.axial[c], axial[c]),
                (folded.radial[c], radial[c]),
                (folded.azimuthal[c], azimuthal[c]),
            ] {
                assert!(
                    (got - want).norm() / want.norm().max(1e-300) < 1e-13,
                    "component {c}: {got} vs {want}"
                );
            }
        }
    }

    /// Published magnitudes of the direct product |H'_n(kρ)·J_n(kρ')| for
    /// a representative borehole wavenumber.
    #[test]
    fn direct_magnitudes_match_published_table() {
        let k = C64::new(0.25147, 0.79122);
        let rho_src = 0.1270;
        let check = |n: usize, rho: f64, expect: f64| {
            let got = direct_magnitude_log(n, k, rho, rho_src).exp();
            assert!(
                (got - expect).abs() / expect < 2e-4,
                "n={n} rho={rho}: {got:e} vs {expect:e}"
            );
            // Same number through the raw reference route.
            let ht = reference::hankel1_table(n + 1, k * rho);
            let jt = reference::bessel_j_table(n + 1, k * rho_src);
            let raw = (reference::derivative_from_table(&ht, n, k * rho).log_abs()
                + jt[n].log_abs())
            .exp();
            assert!((raw - expect).abs() / expect < 2e-4);
        };
        check(0, rho_src, 5.9670);
        check(10, rho_src, 3.0189);
        check(20, 2.0 * rho_src, 1.4390e-6);
        check(50, 5.0 * rho_src, 6.7907e-36);
    }

    #[test]
    fn subtraction_decision_thresholds() {
        let k = C64::new(0.25147, 0.79122);
        let rho_src = 0.1270;
        assert!(subtraction_decision(CaseId::Case1, 10, k, rho_src, rho_src));
        assert!(subtraction_decision(CaseId::Case1, 50, k, rho_src, rho_src));
        assert!(!subtraction_decision(
            CaseId::Case1,
            50,
            k,
            5.0 * rho_src,
            rho_src
        ));
    }

    #[test]
    #[should_panic(expected = "same-layer")]
    fn subtraction_decision_rejects_cross_layer() {
        subtraction_decision(CaseId::Case3, 10, C64::new(0.3, 0.8), 0.2, 0.1);
    }

    /// Unit-moment dipole fields in a 1 Ω·m whole space at 36 kHz,
    /// axial offset 16 in, source and observation radius 5 in: published
    /// amplitude/phase benchmarks for the coaxial and coplanar setups.
    #[test]
    fn closed_form_matches_published_benchmarks() {
        let eps = C64::new(crate::EPS0, 1.0 / OMEGA);
        let mu = C64::new(crate::MU0, 0.0);
        let rho = 5.0 * crate::INCH;
        let dz = 16.0 * crate::INCH;
        let src = [rho, 0.0, 0.0];
        let obs = [rho, 0.0, dz];

        let (_, h) = closed_form_direct(true, 1.0, [0.0, 1.0, 0.0], src, obs, eps, mu, OMEGA);
        let mag = h[1].norm();
        let ph = h[1].arg().to_degrees();
        assert!((mag - 4.1884).abs() / 4.1884 < 1e-3, "|Hφ| = {mag}");
        assert!((ph - (-91.0681)).abs() < 0.1, "arg Hφ = {ph}");

        let (_, h) = closed_form_direct(true, 1.0, [0.0, 0.0, 1.0], src, obs, eps, mu, OMEGA);
        let mag = h[2].norm();
        let ph = h[2].arg().to_degrees();
        assert!((mag - 8.3259).abs() / 8.3259 < 1e-3, "|Hz| = {mag}");
        assert!((ph - 91.2105).abs() < 0.1, "arg Hz = {ph}");
    }

    /// Every case scalar stays within the unit bound and every block stays
    /// finite on a high-contrast stack across a wide spectral sweep.
    #[test]
    fn case_scalars_bounded_on_stress_stack() {
        let stack = LayerStack::new(vec![
            layer(1.0, 1e5, Some(4.0 * crate::INCH)),
            layer(1.0, 1.0, Some(5.5 * crate::INCH)),
            layer(1.0, 0.2, None),
        ])
        .unwrap();
        let positions = [
            (5.0 * crate::INCH, 4.5 * crate::INCH), // both layer 1
            (6.0 * crate::INCH, 5.0 * crate::INCH), // obs layer 2
            (2.0 * crate::INCH, 5.0 * crate::INCH), // obs layer 0
        ];
        for &kz in &[
            C64::new(1e-4, 0.0),
            C64::new(40.0, 5.0),
            C64::new(2.0, 700.0),
        ] {
            let ws = SpectralWorkspace::new(&stack, OMEGA, kz, 60, None);
            for &(rho, rho_src) in &positions {
                let case = classify_case(&stack, rho, rho_src);
                let obs = LayerPoint::new(&ws, stack.layer_of_observation(rho), rho);
                let src = LayerPoint::new(&ws, stack.layer_of_source(rho_src), rho_src);
                for n in [0usize, 25, 60] {
                    let set = CoefficientSet::build(n, &ws).unwrap();
                    let di = assemble_fn(case, n, &ws, &set, &obs, &src).unwrap();
                    assert!(
                        di.scalar.norm() <= 1.0 + 1e-12,
                        "{case:?} n={n} kz={kz}: |scalar| = {}",
                        di.scalar.norm()
                    );
                    let b = di.blocks();
                    for mat in [&b.g, &b.gp, &b.gd, &b.gdp] {
                        assert!(mat.is_finite(), "{case:?} n={n} kz={kz}");
                    }
                }
            }
        }
    }
}
