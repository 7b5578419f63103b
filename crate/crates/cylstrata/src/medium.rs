//! Material stack geometry and per-spectral-point wavenumbers.
//!
//! A stack is a list of coaxial cylindrical layers, indexed from the axis
//! outward (`0..N-1`). Layer `l` occupies `a_{l-1} < ρ < a_l` where `a_l`
//! is its outer radius; the last layer is unbounded. Interface `m`
//! (`0..N-2`) separates layers `m` and `m+1` at radius `a_m`.
//!
//! Time convention `e^{-iωt}`: lossy media have constitutive parameters
//! with *positive* imaginary part, wavenumbers in the closed first
//! quadrant, and outgoing radial waves carried by `H^{(1)}`.

use crate::error::{Error, Result};
use crate::{C64, EPS0, MU0};

/// One homogeneous cylindrical shell.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Relative permittivity (real part).
    pub eps_r: f64,
    /// Electric conductivity, S/m.
    pub sigma: f64,
    /// Relative permeability (real part).
    pub mu_r: f64,
    /// Magnetic conductivity, Ω/m (dual loss term; nonzero mainly for
    /// duality-transformed stacks).
    pub sigma_m: f64,
    /// Outer radius in meters; `None` for the unbounded outermost layer.
    pub outer_radius: Option<f64>,
}

impl Layer {
    /// Complex permittivity `ε = ε₀ε_r + iσ/ω`.
    pub fn eps(&self, omega: f64) -> C64 {
        C64::new(EPS0 * self.eps_r, self.sigma / omega)
    }

    /// Complex permeability `μ = μ₀μ_r + iσ_m/ω`.
    pub fn mu(&self, omega: f64) -> C64 {
        C64::new(MU0 * self.mu_r, self.sigma_m / omega)
    }

    /// Complex wavenumber `k = ω√(με)`, first quadrant.
    pub fn wavenumber(&self, omega: f64) -> C64 {
        let k = (self.eps(omega) * self.mu(omega)).sqrt() * omega;
        // Principal square root of a first/second-quadrant product already
        // lands in the first quadrant; guard the sign anyway for exactness
        // on the axes.
        if k.re < 0.0 || (k.re == 0.0 && k.im < 0.0) {
            -k
        } else {
            k
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.sigma == 0.0 && self.sigma_m == 0.0
    }
}

/// A candidate spectral branch point `k_z = ±k_l` of one layer.
#[derive(Debug, Clone, Copy)]
pub struct BranchPoint {
    pub k: C64,
    pub lossless: bool,
}

/// The full radial stratification.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let stack = LayerStack { layers };
        stack.validate()?;
        Ok(stack)
    }

    /// Structural checks: at least one layer, exactly the last one
    /// unbounded, radii strictly increasing, material parameters passive.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidStack("stack has no layers".into()));
        }
        let n = self.layers.len();
        let mut prev = 0.0f64;
        for (l, layer) in self.layers.iter().enumerate() {
            match (l + 1 == n, layer.outer_radius) {
                (true, Some(r)) => {
                    return Err(Error::InvalidStack(format!(
                        "outermost layer must be unbounded, found radius {r}"
                    )))
                }
                (false, None) => {
                    return Err(Error::InvalidStack(format!(
                        "layer {l} is interior but has no outer radius"
                    )))
                }
                (false, Some(r)) => {
                    if !(r > prev) || !r.is_finite() {
                        return Err(Error::InvalidStack(format!(
                            "layer radii must be finite and strictly increasing, \
                             got {r} after {prev}"
                        )));
                    }
                    prev = r;
                }
                (true, None) => {}
            }
            if layer.eps_r <= 0.0 || layer.mu_r <= 0.0 {
                return Err(Error::InvalidStack(format!(
                    "layer {l}: relative permittivity/permeability must be positive"
                )));
            }
            if layer.sigma < 0.0 || layer.sigma_m < 0.0 {
                return Err(Error::InvalidStack(format!(
                    "layer {l}: conductivities must be non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Number of interfaces (`N-1`).
    pub fn interface_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Radius of interface `m` (the outer radius of layer `m`).
    pub fn interface_radius(&self, m: usize) -> f64 {
        self.layers[m].outer_radius.expect("interior layer radius")
    }

    /// Layer containing a *source* at radius `rho`: a source exactly on an
    /// interface belongs to the inner layer.
    pub fn layer_of_source(&self, rho: f64) -> usize {
        for m in 0..self.interface_count() {
            if rho <= self.interface_radius(m) {
                return m;
            }
        }
        self.layers.len() - 1
    }

    /// Layer containing an *observation point* at radius `rho`: a point
    /// exactly on an interface belongs to the outer layer.
    pub fn layer_of_observation(&self, rho: f64) -> usize {
        for m in 0..self.interface_count() {
            if rho < self.interface_radius(m) {
                return m;
            }
        }
        self.layers.len() - 1
    }

    /// Layer index and wavenumber with the smallest `|k|` (sets the scale
    /// of the low-spectrum contour detour).
    pub fn min_wavenumber(&self, omega: f64) -> (usize, C64) {
        let mut best = (0usize, self.layers[0].wavenumber(omega));
        for (l, layer) in self.layers.iter().enumerate().skip(1) {
            let k = layer.wavenumber(omega);
            if k.norm() < best.1.norm() {
                best = (l, k);
            }
        }
        best
    }

    /// Spectral branch-point candidates: one per layer.
    pub fn branch_points(&self, omega: f64) -> Vec<BranchPoint> {
        self.layers
            .iter()
            .map(|layer| BranchPoint {
                k: layer.wavenumber(omega),
                lossless: layer.is_lossless(),
            })
            .collect()
    }

    /// Electromagnetic dual of the stack: `ε ↔ μ` in every layer. Fields of
    /// a magnetic source in the original stack are obtained from an
    /// electric source in the dual stack.
    pub fn dual(&self) -> LayerStack {
        LayerStack {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    eps_r: l.mu_r * MU0 / EPS0,
                    sigma: l.sigma_m,
                    mu_r: l.eps_r * EPS0 / MU0,
                    sigma_m: l.sigma,
                    outer_radius: l.outer_radius,
                })
                .collect(),
        }
    }
}

/// Square root on the physical radial sheet: `Im ≥ 0`, ties broken toward
/// `Re ≥ 0`.
pub fn sqrt_upper(w: C64) -> C64 {
    let s = w.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// Everything that depends on one spectral point `k_z`: the radial
/// wavenumbers of every layer (on the physical sheet unless overridden by
/// sheet tracking).
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub omega: f64,
    pub k_z: C64,
    pub k_rho: Vec<C64>,
}

impl SpectralState {
    pub fn new(stack: &LayerStack, omega: f64, k_z: C64) -> Self {
        let k_rho = stack
            .layers
            .iter()
            .map(|l| {
                let k = l.wavenumber(omega);
                sqrt_upper(k * k - k_z * k_z)
            })
            .collect();
        SpectralState { omega, k_z, k_rho }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::INCH;

    fn two_layer() -> LayerStack {
        LayerStack::new(vec![
            Layer {
                eps_r: 1.0,
                sigma: 1.0,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: Some(4.0 * INCH),
            },
            Layer {
                eps_r: 1.0,
                sigma: 0.01,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: None,
            },
        ])
        .unwrap()
    }

    #[test]
    fn wavenumber_sits_in_first_quadrant() {
        let omega = 2.0 * std::f64::consts::PI * 36e3;
        for sigma in [0.0, 1e-5, 1.0, 1e7] {
            let l = Layer {
                eps_r: 1.0,
                sigma,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: None,
            };
            let k = l.wavenumber(omega);
            assert!(k.re >= 0.0 && k.im >= 0.0, "k={k} at sigma={sigma}");
            assert!(k.norm() > 0.0);
        }
        // Good conductor: k ≈ (1+i)/δ with skin depth δ = √(2/(ωμσ)).
        let l = Layer {
            eps_r: 1.0,
            sigma: 1e7,
            mu_r: 1.0,
            sigma_m: 0.0,
            outer_radius: None,
        };
        let k = l.wavenumber(omega);
        let delta = (2.0 / (omega * MU0 * 1e7)).sqrt();
        assert!((k.re * delta - 1.0).abs() < 1e-3);
        assert!((k.im * delta - 1.0).abs() < 1e-3);
    }

    #[test]
    fn layer_lookup_tie_rules() {
        let s = two_layer();
        let a = 4.0 * INCH;
        assert_eq!(s.layer_of_source(a * 0.5), 0);
        assert_eq!(s.layer_of_source(a), 0); // on-interface source → inner
        assert_eq!(s.layer_of_source(a * 1.5), 1);
        assert_eq!(s.layer_of_observation(a * 0.5), 0);
        assert_eq!(s.layer_of_observation(a), 1); // on-interface point → outer
        assert_eq!(s.layer_of_observation(a * 1.5), 1);
    }

    #[test]
    fn validation_rejects_malformed_stacks() {
        assert!(LayerStack::new(vec![]).is_err());
        // Unbounded interior layer.
        assert!(LayerStack::new(vec![
            Layer {
                eps_r: 1.0,
                sigma: 0.0,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: None,
            },
            Layer {
                eps_r: 1.0,
                sigma: 0.0,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: None,
            },
        ])
        .is_err());
        // Non-increasing radii.
        assert!(LayerStack::new(vec![
            Layer {
                eps_r: 1.0,
                sigma: 0.0,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: Some(0.2),
            },
            Layer {
                eps_r: 1.0,
                sigma: 0.0,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: Some(0.1),
            },
            Layer {
                eps_r: 1.0,
                sigma: 0.0,
                mu_r: 1.0,
                sigma_m: 0.0,
                outer_radius: None,
            },
        ])
        .is_err());
    }

    #[test]
    fn dual_is_an_involution_and_swaps_constitutives() {
        let s = two_layer();
        let d = s.dual();
        let omega = 1e5;
        for (orig, dual) in s.layers.iter().zip(&d.layers) {
            let (e, m) = (orig.eps(omega), orig.mu(omega));
            let (ed, md) = (dual.eps(omega), dual.mu(omega));
            assert!((ed - m).norm() / m.norm() < 1e-14);
            assert!((md - e).norm() / e.norm() < 1e-14);
        }
        let dd = d.dual();
        for (a, b) in s.layers.iter().zip(&dd.layers) {
            assert!((a.eps_r - b.eps_r).abs() / a.eps_r < 1e-12);
            assert!((a.sigma - b.sigma).abs() <= 1e-12 * a.sigma.max(1.0));
        }
    }

    #[test]
    fn radial_wavenumber_on_physical_sheet() {
        let s = two_layer();
        let omega = 2.0 * std::f64::consts::PI * 36e3;
        // Along the positive real k_z axis past every |k|, k_ρ becomes
        // almost purely imaginary (evanescent) with Im > 0.
        let st = SpectralState::new(&s, omega, C64::new(10.0, 0.0));
        for kr in &st.k_rho {
            assert!(kr.im >= 0.0);
        }
        // At k_z = 0 the radial wavenumber is the layer wavenumber.
        let st0 = SpectralState::new(&s, omega, C64::new(0.0, 0.0));
        for (kr, l) in st0.k_rho.iter().zip(&s.layers) {
            let k = l.wavenumber(omega);
            assert!((kr - k).norm() < 1e-12 * k.norm());
        }
    }

    #[test]
    fn sqrt_upper_half_plane_choice() {
        assert_eq!(sqrt_upper(C64::new(4.0, 0.0)), C64::new(2.0, 0.0));
        let s = sqrt_upper(C64::new(-4.0, 0.0));
        assert!((s - C64::new(0.0, 2.0)).norm() < 1e-15);
        let s = sqrt_upper(C64::new(0.0, -4.0));
        assert!(s.im > 0.0 && s.re < 0.0);
    }
}
