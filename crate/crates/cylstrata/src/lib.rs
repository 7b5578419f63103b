//! Electromagnetic fields of point dipoles in cylindrically stratified media,
//! computed without overflow or underflow in double precision.
//!
//! A point electric or magnetic dipole radiating inside a set of coaxial
//! material layers produces fields that are naturally written as a spectral
//! integral over the axial wavenumber `k_z` of an azimuthal mode sum. The
//! ingredients of that sum — Bessel and Hankel functions of complex argument,
//! interface reflection/transmission matrices, and their multilayer
//! generalizations — individually span hundreds of orders of magnitude once
//! the layers are very conductive, very thin, or the mode order is high,
//! even though the assembled integrand is perfectly tame.
//!
//! This crate keeps every *stored* number in a representable range by
//! factoring each cylindrical function into a bounded "hatted" part and a
//! symbolic logarithmic scale factor. Scale factors are combined analytically
//! and only materialized in pairings that are bounded by construction, so the
//! extreme magnitudes cancel on paper instead of in floating point.
//!
//! # Modules
//!
//! - [`special`] — range-conditioned cylindrical functions (classification
//!   into small / moderate / large argument regimes, hatted values, scales)
//!   plus reference-quality raw Bessel/Hankel evaluation.
//! - [`medium`] — layer stacks, complex constitutive parameters, per-layer
//!   radial wavenumbers, branch points.
//! - [`coefficients`] — hatted interface reflection/transmission matrices and
//!   their multilayer (generalized) recursions.
//! - [`integrand`] — the four source/observer layer cases of the spectral
//!   integrand, source excitation factors, transverse field operators,
//!   azimuthal mode folding, and the closed-form homogeneous-medium fields.
//! - [`contour`] — spectral integration paths (standard and bent), their
//!   scale parameters, Gauss–Legendre panel quadrature, and Riemann-sheet
//!   tracking for lossless layers.
//! - [`solver`] — the adaptive field solver and error metrics.
//! - [`jobfile`] — TOML job-file parsing and canonical dumping.
//!
//! # Conventions
//!
//! Time dependence is `e^{-iωt}`, so passive media have complex permittivity
//! `ε = ε₀ε_r + iσ/ω` and permeability `μ = μ₀μ_r + iσ*/ω` with positive
//! imaginary parts, outgoing waves carry the first-kind Hankel function, and
//! all radial wavenumbers take the principal branch `Im k_ρ ≥ 0`.

pub mod coefficients;
pub mod contour;
pub mod error;
pub mod integrand;
pub mod jobfile;
pub mod logscale;
pub mod mat2;
pub mod medium;
pub mod solver;
pub mod special;

pub use error::Error;
pub use logscale::LogScale;
pub use mat2::Mat2;

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_818_8e-12;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_061_27e-6;
/// Exact inch-to-metre conversion.
pub const INCH: f64 = 0.0254;

/// Shorthand used across the crate.
pub type C64 = num_complex::Complex64;
