//! Spectral integration paths and quadrature.
//!
//! The `k_z` inversion integral runs along one of two polylines in the
//! complex plane. The *standard* path is a flat trapezoid that detours
//! just above the origin and returns to the real axis, truncated where the
//! integrand has decayed by twenty decades; it converges through integrand
//! decay alone, which becomes hopeless when the axial offset `z − z'` is
//! small. The *bent* path turns its tails away from the real axis so the
//! axial phase factor `e^{ik_z(z−z')}` supplies exponential decay instead;
//! its horizontal extent only needs to clear the enclosed branch points.
//! Path choice compares the two truncation widths.
//!
//! Quadrature is fixed-order Gauss–Legendre panels laid along each
//! segment, with panel counts proportional to arc length. For lossless
//! layers, whose branch cuts hug the real axis, radial wavenumbers are
//! sheet-tracked along the node sequence instead of taken pointwise.

use crate::error::{Error, Result};
use crate::medium::{sqrt_upper, LayerStack};
use crate::C64;

/// Which polyline a path follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    /// Flat trapezoid on the real axis with a detour over the origin.
    Sip,
    /// Bent path, tails rising into the upper half-plane (`z − z' > 0`).
    DsipUp,
    /// Bent path, tails dropping into the lower half-plane (`z − z' < 0`).
    DsipDown,
}

/// A concrete integration polyline with its construction parameters.
#[derive(Debug, Clone)]
pub struct PathSpec {
    /// Polyline vertices in path order.
    pub vertices: Vec<C64>,
    pub kind: PathKind,
    /// Half-width of the origin detour.
    pub delta1: f64,
    /// Height of the origin detour.
    pub delta2: f64,
    /// Horizontal truncation half-width.
    pub delta3: f64,
    /// Vertical tail extent (infinite for the standard path).
    pub delta4: f64,
    /// Set when every branch point failed the tail-relevance filter and
    /// the full set was used for the width instead.
    pub relevance_fallback: bool,
}

/// Ratio threshold for the standard-path truncation search.
const PROBE_CUTOFF: f64 = 1e-20;
/// Doubling budget for the truncation search.
const MAX_DOUBLINGS: u32 = 60;
/// Minimum clearance between path vertices and branch points, relative to
/// the smallest layer wavenumber.
const CLEARANCE_REL: f64 = 1e-6;

/// Default tail-decay target for the bent path.
pub const DEFAULT_GAMMA: f64 = 1e-22;
/// Default horizontal margin factor for the bent path.
pub const DEFAULT_F: f64 = 2.0;

/// Origin-detour geometry shared by both path kinds: a fifth of the
/// smallest layer wavenumber in each direction, with the height defaulting
/// to the half-width when the governing layer is lossless (or its real
/// part vanishes).
pub(crate) fn detour_deltas(stack: &LayerStack, omega: f64) -> (f64, f64, C64) {
    let (_, k_min) = stack.min_wavenumber(omega);
    let mut d1 = k_min.re / 5.0;
    if d1 == 0.0 {
        d1 = k_min.norm() / 5.0;
    }
    let mut d2 = k_min.im / 5.0;
    if d2 == 0.0 {
        d2 = d1;
    }
    (d1, d2, k_min)
}

/// Push the truncation width and detour height off any branch point that
/// sits too close to a vertex.
fn enforce_clearance(
    stack: &LayerStack,
    omega: f64,
    k_min: C64,
    delta3: &mut f64,
    delta2: &mut f64,
    vertices: impl Fn(f64, f64) -> Vec<C64>,
) {
    let tol = CLEARANCE_REL * k_min.norm();
    let bps: Vec<C64> = stack
        .branch_points(omega)
        .iter()
        .flat_map(|b| [b.k, -b.k])
        .collect();
    for _ in 0..100 {
        let vs = vertices(*delta3, *delta2);
        let too_close = vs
            .iter()
            .any(|v| bps.iter().any(|b| (v - b).norm() < tol));
        if !too_close {
            return;
        }
        *delta3 *= 1.0 + 1e-5;
        *delta2 += 2.0 * tol;
    }
}

/// Build the standard path. The truncation half-width starts at five times
/// the smallest wavenumber magnitude and doubles until the integrand
/// magnitude at the truncation tip has fallen twenty decades below its
/// elbow value, as reported by `probe`.
pub fn build_sip(
    stack: &LayerStack,
    omega: f64,
    probe: &dyn Fn(C64) -> f64,
) -> Result<PathSpec> {
    let (delta1, mut delta2, k_min) = detour_deltas(stack, omega);
    let elbow_mag = probe(C64::new(delta1, delta2));
    let initial = 5.0 * k_min.norm();
    let decayed = |d3: f64| probe(C64::new(d3, 0.0)) <= PROBE_CUTOFF * elbow_mag;
    let mut delta3 = initial;
    let mut ok = false;
    for _ in 0..=MAX_DOUBLINGS {
        if decayed(delta3) {
            ok = true;
            break;
        }
        delta3 *= 2.0;
    }
    if !ok {
        return Err(Error::ProbeNeverDecays(delta3));
    }
    if delta3 > initial {
        // Bisect inside the final doubling bracket so the tail is not
        // oversized by up to a factor of two.
        let mut lo = delta3 / 2.0;
        let mut hi = delta3;
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if decayed(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        delta3 = hi;
    }
    let make = |d3: f64, d2: f64| {
        vec![
            C64::new(-d3, 0.0),
            C64::new(-delta1, d2),
            C64::new(delta1, d2),
            C64::new(d3, 0.0),
        ]
    };
    enforce_clearance(stack, omega, k_min, &mut delta3, &mut delta2, make);
    Ok(PathSpec {
        vertices: make(delta3, delta2),
        kind: PathKind::Sip,
        delta1,
        delta2,
        delta3,
        delta4: f64::INFINITY,
        relevance_fallback: false,
    })
}

/// Build the bent path for axial offset `dz ≠ 0`. The tail height is set
/// so the axial phase factor alone reaches `gamma`; branch points whose
/// own decay already exceeds that height are ignored when sizing the
/// horizontal extent.
pub fn build_dsip(
    stack: &LayerStack,
    omega: f64,
    dz: f64,
    gamma: f64,
    f: f64,
) -> PathSpec {
    assert!(dz != 0.0, "bent path requires a nonzero axial offset");
    assert!(gamma > 0.0 && gamma < 1.0);
    let (delta1, mut delta2, k_min) = detour_deltas(stack, omega);
    let delta4 = -gamma.ln() / dz.abs();
    let bps = stack.branch_points(omega);
    let relevant: Vec<f64> = bps
        .iter()
        .filter(|b| b.k.im <= delta4)
        .map(|b| b.k.re.abs())
        .collect();
    let relevance_fallback = relevant.is_empty();
    let max_re = if relevance_fallback {
        bps.iter().map(|b| b.k.re.abs()).fold(0.0, f64::max)
    } else {
        relevant.into_iter().fold(0.0, f64::max)
    };
    let mut delta3 = if max_re > 0.0 {
        f * max_re
    } else {
        f * k_min.norm()
    };
    // The detour must fit inside the horizontal extent.
    delta3 = delta3.max(2.0 * delta1);

    let tail = if dz > 0.0 { delta4 } else { -delta4 };
    let make = |d3: f64, d2: f64| {
        vec![
            C64::new(-d3, tail),
            C64::new(-d3, 0.0),
            C64::new(-delta1, d2),
            C64::new(delta1, d2),
            C64::new(d3, 0.0),
            C64::new(d3, tail),
        ]
    };
    enforce_clearance(stack, omega, k_min, &mut delta3, &mut delta2, make);
    PathSpec {
        vertices: make(delta3, delta2),
        kind: if dz > 0.0 {
            PathKind::DsipUp
        } else {
            PathKind::DsipDown
        },
        delta1,
        delta2,
        delta3,
        delta4,
        relevance_fallback,
    }
}

/// Select a path: zero axial offset forces the standard path; otherwise
/// take the standard path only when its truncation width is smaller than
/// the bent path's tail height.
pub fn choose_path(
    stack: &LayerStack,
    omega: f64,
    dz: f64,
    probe: &dyn Fn(C64) -> f64,
    gamma: f64,
    f: f64,
) -> Result<PathSpec> {
    if dz == 0.0 {
        return build_sip(stack, omega, probe);
    }
    let delta4 = -gamma.ln() / dz.abs();
    match build_sip(stack, omega, probe) {
        Ok(sip) if sip.delta3 < delta4 => Ok(sip),
        Ok(_) => Ok(build_dsip(stack, omega, dz, gamma, f)),
        Err(Error::ProbeNeverDecays(_)) => Ok(build_dsip(stack, omega, dz, gamma, f)),
        Err(e) => Err(e),
    }
}

/// 16-point Gauss–Legendre half-table (symmetric abscissas / weights).
const GL16: [(f64, f64); 8] = [
    (0.0950125098376374402, 0.1894506104550684963),
    (0.2816035507792589132, 0.1826034150449235888),
    (0.4580167776572273863, 0.1691565193950025382),
    (0.6178762444026437484, 0.1495959888165767320),
    (0.7554044083550030339, 0.1246289712555338721),
    (0.8656312023878317439, 0.0951585116824927848),
    (0.9445750230732325761, 0.0622535239386478929),
    (0.9894009349916499326, 0.0271524594117540949),
];

/// Generate quadrature nodes and complex line-measure weights along the
/// polyline. Panels of 16 Gauss–Legendre points are distributed over the
/// segments proportionally to arc length, at least one panel per segment;
/// nodes come out ordered along the path.
pub fn quadrature_nodes(path: &PathSpec, n_int: usize) -> Vec<(C64, C64)> {
    let segs: Vec<(C64, C64)> = path
        .vertices
        .windows(2)
        .map(|w| (w[0], w[1]))
        .collect();
    let lengths: Vec<f64> = segs.iter().map(|(a, b)| (b - a).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let target_panels = n_int.div_ceil(16).max(segs.len());

    // Largest-remainder allocation with a floor of one panel per segment.
    let quotas: Vec<f64> = lengths
        .iter()
        .map(|l| target_panels as f64 * l / total)
        .collect();
    let mut panels: Vec<usize> = quotas.iter().map(|q| (q.floor() as usize).max(1)).collect();
    let mut spent: usize = panels.iter().sum();
    if spent < target_panels {
        let mut order: Vec<usize> = (0..segs.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        let mut i = 0;
        while spent < target_panels {
            panels[order[i % order.len()]] += 1;
            spent += 1;
            i += 1;
        }
    }

    let mut nodes = Vec::with_capacity(spent * 16);
    for (s, &(a, b)) in segs.iter().enumerate() {
        let step = (b - a) / panels[s] as f64;
        for p in 0..panels[s] {
            let lo = a + step * p as f64;
            let mid = lo + step * 0.5;
            let half = step * 0.5;
            for &(x, w) in GL16.iter().rev() {
                nodes.push((mid - half * x, half * w));
            }
            for &(x, w) in GL16.iter() {
                nodes.push((mid + half * x, half * w));
            }
        }
    }
    nodes
}

/// Per-node, per-layer radial wavenumbers with branch-sheet continuity.
/// Lossy layers always take the physical-sheet value. Lossless layers,
/// whose cuts lie on the real axis, follow the sign that keeps `k_ρ`
/// continuous from node to node, starting on the `Im ≥ 0` branch.
pub fn track_sheet(nodes: &[C64], stack: &LayerStack, omega: f64) -> Vec<Vec<C64>> {
    let n_layers = stack.len();
    let ks: Vec<C64> = stack
        .layers
        .iter()
        .map(|l| l.wavenumber(omega))
        .collect();
    let lossless: Vec<bool> = stack.layers.iter().map(|l| l.is_lossless()).collect();
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(nodes.len());
    let mut prev: Vec<C64> = Vec::with_capacity(n_layers);
    for (i, &kz) in nodes.iter().enumerate() {
        let mut row = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let principal = sqrt_upper(ks[l] * ks[l] - kz * kz);
            let chosen = if !lossless[l] || i == 0 {
                principal
            } else {
                let d_plus = (principal - prev[l]).norm();
                let d_minus = (-principal - prev[l]).norm();
                if d_minus < d_plus {
                    -principal
                } else {
                    principal
                }
            };
            row.push(chosen);
        }
        prev = row.clone();
        out.push(row);
    }
    out
}
