//! TOML job files: a layer stack, one dipole source, observation points,
//! and solver settings, with units explicit in every key name.
//!
//! Lengths accept an `_in` (inches, converted at exactly 0.0254 m/in) or
//! `_m` spelling of each key; angles accept `_deg` or `_rad`; conductivity
//! may be given directly (`sigma_s_per_m`, alias `sigma`) or as
//! `resistivity_ohm_m`. Exactly one spelling of each quantity may appear.
//!
//! [`JobFile::to_config`] lowers the parsed document to a runnable
//! [`JobConfig`]; [`JobFile::from_config`] rebuilds the canonical all-metric
//! document, whose serialization reparses to an identical configuration.
//!
//! ```toml
//! [[layers]]
//! resistivity_ohm_m = 1.0
//! outer_radius_in = 4.0
//!
//! [[layers]]
//! resistivity_ohm_m = 1.0
//!
//! [source]
//! kind = "magnetic"
//! moment = 1.0
//! frequency_hz = 36000.0
//! rho_in = 5.0
//! orientation = [0.0, 1.0, 0.0]
//!
//! [[observe.points]]
//! rho_in = 5.0
//! z_in = 16.0
//! ```

use crate::error::{Error, Result};
use crate::medium::{Layer, LayerStack};
use crate::solver::{
    CylPoint, Dipole, DipoleKind, JobConfig, PathChoice, SolverSettings, SubtractionPolicy,
};
use crate::INCH;
use serde::{Deserialize, Serialize};

/// One `[[layers]]` entry, axis outward. Interior layers need an outer
/// radius; the last layer must not have one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resistivity_ohm_m: Option<f64>,
    #[serde(alias = "sigma", skip_serializing_if = "Option::is_none")]
    pub sigma_s_per_m: Option<f64>,
    #[serde(default = "unity")]
    pub eps_r: f64,
    #[serde(default = "unity")]
    pub mu_r: f64,
    /// Magnetic conductivity, Ω/m.
    #[serde(default)]
    pub sigma_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_radius_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_radius_m: Option<f64>,
}

fn unity() -> f64 {
    1.0
}

/// The `[source]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub kind: KindEntry,
    pub moment: f64,
    pub frequency_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_m: Option<f64>,
    /// Cylindrical components `(ρ̂, φ̂, ẑ)` at the source point.
    pub orientation: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindEntry {
    Electric,
    Magnetic,
}

/// The `[observe]` table: explicit points, a grid, or both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserveEntry {
    pub points: Vec<PointEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridEntry>,
}

/// One `[[observe.points]]` entry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_m: Option<f64>,
}

/// The `[observe.grid]` table: an inclusive `n_rho × n_z` lattice at one
/// azimuth, ρ-major with z varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_start_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_start_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_stop_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_stop_m: Option<f64>,
    pub n_rho: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_start_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_start_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_stop_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_stop_m: Option<f64>,
    pub n_z: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
}

/// The `[solver]` table; every key optional, defaults shown by
/// `dump-config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverEntry {
    pub tolerance: f64,
    pub initial_n_max: usize,
    pub initial_n_int: usize,
    pub max_iterations: usize,
    pub path: PathEntry,
    pub gamma: f64,
    pub f_dsip: f64,
    pub subtraction: SubtractionEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathEntry {
    Auto,
    Sip,
    Dsip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubtractionEntry {
    Auto,
    Off,
}

impl From<PathEntry> for PathChoice {
    fn from(p: PathEntry) -> Self {
        match p {
            PathEntry::Auto => PathChoice::Auto,
            PathEntry::Sip => PathChoice::Sip,
            PathEntry::Dsip => PathChoice::Dsip,
        }
    }
}

impl From<PathChoice> for PathEntry {
    fn from(p: PathChoice) -> Self {
        match p {
            PathChoice::Auto => PathEntry::Auto,
            PathChoice::Sip => PathEntry::Sip,
            PathChoice::Dsip => PathEntry::Dsip,
        }
    }
}

impl From<SubtractionEntry> for SubtractionPolicy {
    fn from(s: SubtractionEntry) -> Self {
        match s {
            SubtractionEntry::Auto => SubtractionPolicy::Auto,
            SubtractionEntry::Off => SubtractionPolicy::Off,
        }
    }
}

impl From<SubtractionPolicy> for SubtractionEntry {
    fn from(s: SubtractionPolicy) -> Self {
        match s {
            SubtractionPolicy::Auto => SubtractionEntry::Auto,
            SubtractionPolicy::Off => SubtractionEntry::Off,
        }
    }
}

impl SolverEntry {
    pub fn to_settings(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.tolerance,
            initial_n_max: self.initial_n_max,
            initial_n_int: self.initial_n_int,
            max_iterations: self.max_iterations,
            path: self.path.into(),
            gamma: self.gamma,
            f_dsip: self.f_dsip,
            subtraction: self.subtraction.into(),
        }
    }

    pub fn from_settings(s: &SolverSettings) -> Self {
        Self {
            tolerance: s.tolerance,
            initial_n_max: s.initial_n_max,
            initial_n_int: s.initial_n_int,
            max_iterations: s.max_iterations,
            path: s.path.into(),
            gamma: s.gamma,
            f_dsip: s.f_dsip,
            subtraction: s.subtraction.into(),
        }
    }
}

impl Default for SolverEntry {
    fn default() -> Self {
        SolverEntry::from_settings(&SolverSettings::default())
    }
}

/// A parsed job document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub layers: Vec<LayerEntry>,
    pub source: SourceEntry,
    #[serde(default)]
    pub observe: ObserveEntry,
    #[serde(default)]
    pub solver: SolverEntry,
}

/// Resolve a length given in at most one of inches/meters.
fn pick_length(
    section: &str,
    what: &str,
    inches: Option<f64>,
    meters: Option<f64>,
) -> Result<Option<f64>> {
    match (inches, meters) {
        (Some(_), Some(_)) => Err(Error::JobFile(format!(
            "{section}: give {what} in inches or meters, not both"
        ))),
        (Some(v), None) => Ok(Some(v * INCH)),
        (None, Some(v)) => Ok(Some(v)),
        (None, None) => Ok(None),
    }
}

fn require(section: &str, what: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::JobFile(format!("{section}: missing {what}")))
}

/// Resolve an angle given in at most one of degrees/radians; absent = 0.
fn pick_angle(section: &str, deg: Option<f64>, rad: Option<f64>) -> Result<f64> {
    match (deg, rad) {
        (Some(_), Some(_)) => Err(Error::JobFile(format!(
            "{section}: give the azimuth in degrees or radians, not both"
        ))),
        (Some(v), None) => Ok(v.to_radians()),
        (None, Some(v)) => Ok(v),
        (None, None) => Ok(0.0),
    }
}

#[allow(clippy::too_many_arguments)]
fn resolve_point(
    section: &str,
    rho_in: Option<f64>,
    rho_m: Option<f64>,
    phi_deg: Option<f64>,
    phi_rad: Option<f64>,
    z_in: Option<f64>,
    z_m: Option<f64>,
) -> Result<CylPoint> {
    let rho = require(section, "rho_in or rho_m", pick_length(section, "rho", rho_in, rho_m)?)?;
    let phi = pick_angle(section, phi_deg, phi_rad)?;
    let z = pick_length(section, "z", z_in, z_m)?.unwrap_or(0.0);
    Ok(CylPoint::new(rho, phi, z))
}

impl LayerEntry {
    fn to_layer(&self, index: usize, last: bool) -> Result<Layer> {
        let section = format!("layers[{index}]");
        let sigma = match (self.resistivity_ohm_m, self.sigma_s_per_m) {
            (Some(_), Some(_)) => {
                return Err(Error::JobFile(format!(
                    "{section}: give resistivity_ohm_m or sigma_s_per_m, not both"
                )))
            }
            (Some(r), None) => {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::JobFile(format!(
                        "{section}: resistivity must be positive and finite, got {r}"
                    )));
                }
                1.0 / r
            }
            (None, Some(s)) => s,
            (None, None) => {
                return Err(Error::JobFile(format!(
                    "{section}: one of resistivity_ohm_m or sigma_s_per_m is required"
                )))
            }
        };
        let outer =
            pick_length(&section, "the outer radius", self.outer_radius_in, self.outer_radius_m)?;
        if last && outer.is_some() {
            return Err(Error::JobFile(format!(
                "{section}: the outermost layer is unbounded; remove its outer radius"
            )));
        }
        if !last && outer.is_none() {
            return Err(Error::JobFile(format!(
                "{section}: interior layers need outer_radius_in or outer_radius_m"
            )));
        }
        Ok(Layer {
            eps_r: self.eps_r,
            sigma,
            mu_r: self.mu_r,
            sigma_m: self.sigma_m,
            outer_radius: outer,
        })
    }
}

impl PointEntry {
    fn to_point(&self, index: usize) -> Result<CylPoint> {
        resolve_point(
            &format!("observe.points[{index}]"),
            self.rho_in,
            self.rho_m,
            self.phi_deg,
            self.phi_rad,
            self.z_in,
            self.z_m,
        )
    }
}

fn lerp(a: f64, b: f64, i: usize, n: usize) -> f64 {
    if n == 1 {
        a
    } else {
        a + (b - a) * i as f64 / (n - 1) as f64
    }
}

impl GridEntry {
    fn to_points(&self) -> Result<Vec<CylPoint>> {
        let sec = "observe.grid";
        let r0 = require(sec, "rho_start", pick_length(sec, "rho_start", self.rho_start_in, self.rho_start_m)?)?;
        let r1 = require(sec, "rho_stop", pick_length(sec, "rho_stop", self.rho_stop_in, self.rho_stop_m)?)?;
        let z0 = require(sec, "z_start", pick_length(sec, "z_start", self.z_start_in, self.z_start_m)?)?;
        let z1 = require(sec, "z_stop", pick_length(sec, "z_stop", self.z_stop_in, self.z_stop_m)?)?;
        let phi = pick_angle(sec, self.phi_deg, self.phi_rad)?;
        if self.n_rho == 0 || self.n_z == 0 {
            return Err(Error::JobFile(format!("{sec}: n_rho and n_z must be positive")));
        }
        let mut points = Vec::with_capacity(self.n_rho * self.n_z);
        for i in 0..self.n_rho {
            let rho = lerp(r0, r1, i, self.n_rho);
            for j in 0..self.n_z {
                points.push(CylPoint::new(rho, phi, lerp(z0, z1, j, self.n_z)));
            }
        }
        Ok(points)
    }
}

impl JobFile {
    /// Parse a TOML document. Syntax errors keep the parser's line/column
    /// diagnostics.
    pub fn parse(text: &str) -> Result<JobFile> {
        toml::from_str(text).map_err(|e| Error::JobFile(e.to_string()))
    }

    /// Lower the document to a runnable configuration.
    pub fn to_config(&self) -> Result<JobConfig> {
        if self.layers.is_empty() {
            return Err(Error::JobFile("at least one [[layers]] entry is required".into()));
        }
        let n = self.layers.len();
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| l.to_layer(i, i + 1 == n))
            .collect::<Result<Vec<_>>>()?;
        let stack = LayerStack::new(layers)?;

        let s = &self.source;
        let position = resolve_point("source", s.rho_in, s.rho_m, s.phi_deg, s.phi_rad, s.z_in, s.z_m)?;
        let dipole = Dipole {
            kind: match s.kind {
                KindEntry::Electric => DipoleKind::Electric,
                KindEntry::Magnetic => DipoleKind::Magnetic,
            },
            moment: s.moment,
            position,
            orientation: s.orientation,
        };

        let mut points = self
            .observe
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_point(i))
            .collect::<Result<Vec<_>>>()?;
        if let Some(grid) = &self.observe.grid {
            points.extend(grid.to_points()?);
        }
        if points.is_empty() {
            return Err(Error::JobFile(
                "[observe] defines no observation points; add [[observe.points]] or [observe.grid]"
                    .into(),
            ));
        }

        Ok(JobConfig {
            stack,
            frequency_hz: s.frequency_hz,
            dipole,
            points,
            settings: self.solver.to_settings(),
        })
    }

    /// Rebuild the canonical all-metric document for a configuration.
    /// Serializing it and reparsing yields an identical `JobConfig`.
    pub fn from_config(config: &JobConfig) -> JobFile {
        let p = config.dipole.position;
        JobFile {
            layers: config
                .stack
                .layers
                .iter()
                .map(|l| LayerEntry {
                    resistivity_ohm_m: None,
                    sigma_s_per_m: Some(l.sigma),
                    eps_r: l.eps_r,
                    mu_r: l.mu_r,
                    sigma_m: l.sigma_m,
                    outer_radius_in: None,
                    outer_radius_m: l.outer_radius,
                })
                .collect(),
            source: SourceEntry {
                kind: match config.dipole.kind {
                    DipoleKind::Electric => KindEntry::Electric,
                    DipoleKind::Magnetic => KindEntry::Magnetic,
                },
                moment: config.dipole.moment,
                frequency_hz: config.frequency_hz,
                rho_in: None,
                rho_m: Some(p.rho),
                phi_deg: None,
                phi_rad: Some(p.phi),
                z_in: None,
                z_m: Some(p.z),
                orientation: config.dipole.orientation,
            },
            observe: ObserveEntry {
                points: config
                    .points
                    .iter()
                    .map(|q| PointEntry {
                        rho_in: None,
                        rho_m: Some(q.rho),
                        phi_deg: None,
                        phi_rad: Some(q.phi),
                        z_in: None,
                        z_m: Some(q.z),
                    })
                    .collect(),
                grid: None,
            },
            solver: SolverEntry::from_settings(&config.settings),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("job files serialize to TOML")
    }
}
