//! Python bindings: the layer/dipole types and the field solver, with
//! complex field components surfaced as Python complex numbers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cylstrata::contour::PathKind;
use cylstrata::medium::{Layer as CoreLayer, LayerStack};
use cylstrata::solver::{
    self, CylPoint, Dipole as CoreDipole, DipoleKind, PathChoice, SolverSettings,
    SubtractionPolicy,
};
use cylstrata::C64;

fn to_py_err(e: cylstrata::Error) -> PyErr {
    use cylstrata::Error::*;
    match e {
        InvalidJob(_) | InvalidStack(_) | JobFile(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// One homogeneous coaxial layer.
#[pyclass(frozen)]
#[derive(Clone)]
struct Layer {
    inner: CoreLayer,
}

#[pymethods]
impl Layer {
    /// Layer(eps_r=1.0, sigma=0.0, mu_r=1.0, sigma_m=0.0, outer_radius=None)
    ///
    /// `outer_radius` is in meters and must be omitted (None) for the
    /// unbounded outermost layer.
    #[new]
    #[pyo3(signature = (eps_r=1.0, sigma=0.0, mu_r=1.0, sigma_m=0.0, outer_radius=None))]
    fn new(eps_r: f64, sigma: f64, mu_r: f64, sigma_m: f64, outer_radius: Option<f64>) -> Self {
        Layer {
            inner: CoreLayer { eps_r, sigma, mu_r, sigma_m, outer_radius },
        }
    }

    #[getter]
    fn eps_r(&self) -> f64 {
        self.inner.eps_r
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn mu_r(&self) -> f64 {
        self.inner.mu_r
    }

    #[getter]
    fn sigma_m(&self) -> f64 {
        self.inner.sigma_m
    }

    #[getter]
    fn outer_radius(&self) -> Option<f64> {
        self.inner.outer_radius
    }

    fn __repr__(&self) -> String {
        format!(
            "Layer(eps_r={}, sigma={}, mu_r={}, sigma_m={}, outer_radius={:?})",
            self.inner.eps_r,
            self.inner.sigma,
            self.inner.mu_r,
            self.inner.sigma_m,
            self.inner.outer_radius,
        )
    }
}

/// A point dipole source; build with `Dipole.electric(...)` or
/// `Dipole.magnetic(...)`.
#[pyclass(frozen)]
#[derive(Clone)]
struct Dipole {
    inner: CoreDipole,
}

fn make_dipole(
    kind: DipoleKind,
    moment: f64,
    orientation: (f64, f64, f64),
    position: (f64, f64, f64),
) -> Dipole {
    Dipole {
        inner: CoreDipole {
            kind,
            moment,
            position: CylPoint::new(position.0, position.1, position.2),
            orientation: [orientation.0, orientation.1, orientation.2],
        },
    }
}

#[pymethods]
impl Dipole {
    /// Dipole.electric(moment, orientation, position)
    ///
    /// `moment` in A·m; `orientation` are cylindrical components
    /// `(rho, phi, z)` of the dipole axis at the source point (normalized
    /// internally); `position` is `(rho_m, phi_rad, z_m)`.
    #[staticmethod]
    fn electric(moment: f64, orientation: (f64, f64, f64), position: (f64, f64, f64)) -> Dipole {
        make_dipole(DipoleKind::Electric, moment, orientation, position)
    }

    /// Dipole.magnetic(moment, orientation, position)
    ///
    /// `moment` in V·m (a small current loop); arguments as for `electric`.
    #[staticmethod]
    fn magnetic(moment: f64, orientation: (f64, f64, f64), position: (f64, f64, f64)) -> Dipole {
        make_dipole(DipoleKind::Magnetic, moment, orientation, position)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            DipoleKind::Electric => "electric",
            DipoleKind::Magnetic => "magnetic",
        }
    }

    #[getter]
    fn moment(&self) -> f64 {
        self.inner.moment
    }

    #[getter]
    fn position(&self) -> (f64, f64, f64) {
        let p = self.inner.position;
        (p.rho, p.phi, p.z)
    }

    #[getter]
    fn orientation(&self) -> (f64, f64, f64) {
        let o = self.inner.orientation;
        (o[0], o[1], o[2])
    }

    fn __repr__(&self) -> String {
        format!(
            "Dipole.{}({}, {:?}, {:?})",
            self.kind(),
            self.inner.moment,
            self.orientation(),
            self.position(),
        )
    }
}

/// The six field components at one observation point plus the convergence
/// report of the adaptive refinement.
#[pyclass(frozen)]
struct FieldResult {
    inner: solver::FieldResult,
}

#[pymethods]
impl FieldResult {
    #[getter]
    fn e_rho(&self) -> C64 {
        self.inner.e[0]
    }

    #[getter]
    fn e_phi(&self) -> C64 {
        self.inner.e[1]
    }

    #[getter]
    fn e_z(&self) -> C64 {
        self.inner.e[2]
    }

    #[getter]
    fn h_rho(&self) -> C64 {
        self.inner.h[0]
    }

    #[getter]
    fn h_phi(&self) -> C64 {
        self.inner.h[1]
    }

    #[getter]
    fn h_z(&self) -> C64 {
        self.inner.h[2]
    }

    /// `(e_rho, e_phi, e_z)` as complex numbers.
    #[getter]
    fn e(&self) -> (C64, C64, C64) {
        (self.inner.e[0], self.inner.e[1], self.inner.e[2])
    }

    /// `(h_rho, h_phi, h_z)` as complex numbers.
    #[getter]
    fn h(&self) -> (C64, C64, C64) {
        (self.inner.h[0], self.inner.h[1], self.inner.h[2])
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.report.iterations
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.inner.report.n_max
    }

    #[getter]
    fn n_int(&self) -> usize {
        self.inner.report.n_int
    }

    #[getter]
    fn final_error(&self) -> f64 {
        self.inner.report.final_error
    }

    #[getter]
    fn path(&self) -> &'static str {
        match self.inner.report.path_kind {
            PathKind::Sip => "sip",
            PathKind::DsipUp => "dsip-up",
            PathKind::DsipDown => "dsip-down",
        }
    }

    #[getter]
    fn subtraction(&self) -> bool {
        self.inner.report.subtraction
    }

    fn __repr__(&self) -> String {
        format!(
            "FieldResult(e=({:?}, {:?}, {:?}), h=({:?}, {:?}, {:?}), path='{}')",
            self.inner.e[0],
            self.inner.e[1],
            self.inner.e[2],
            self.inner.h[0],
            self.inner.h[1],
            self.inner.h[2],
            self.path(),
        )
    }
}

fn build_stack(layers: Vec<Layer>) -> PyResult<LayerStack> {
    LayerStack::new(layers.into_iter().map(|l| l.inner).collect()).map_err(to_py_err)
}

#[allow(clippy::too_many_arguments)]
fn build_settings(
    tolerance: Option<f64>,
    initial_n_max: Option<usize>,
    initial_n_int: Option<usize>,
    max_iterations: Option<usize>,
    path: Option<&str>,
    gamma: Option<f64>,
    f_dsip: Option<f64>,
    subtraction: Option<&str>,
) -> PyResult<SolverSettings> {
    let mut s = SolverSettings::default();
    if let Some(v) = tolerance {
        s.tolerance = v;
    }
    if let Some(v) = initial_n_max {
        s.initial_n_max = v;
    }
    if let Some(v) = initial_n_int {
        s.initial_n_int = v;
    }
    if let Some(v) = max_iterations {
        s.max_iterations = v;
    }
    if let Some(v) = path {
        s.path = match v {
            "auto" => PathChoice::Auto,
            "sip" => PathChoice::Sip,
            "dsip" => PathChoice::Dsip,
            other => {
                return Err(PyValueError::new_err(format!(
                    "path must be 'auto', 'sip' or 'dsip', not '{other}'"
                )))
            }
        };
    }
    if let Some(v) = gamma {
        s.gamma = v;
    }
    if let Some(v) = f_dsip {
        s.f_dsip = v;
    }
    if let Some(v) = subtraction {
        s.subtraction = match v {
            "auto" => SubtractionPolicy::Auto,
            "off" => SubtractionPolicy::Off,
            other => {
                return Err(PyValueError::new_err(format!(
                    "subtraction must be 'auto' or 'off', not '{other}'"
                )))
            }
        };
    }
    Ok(s)
}

/// compute_fields(layers, dipole, frequency_hz, point, *, tolerance=None, ...)
///
/// All six field components at `point = (rho_m, phi_rad, z_m)`; keyword
/// arguments override individual solver settings.
#[pyfunction]
#[pyo3(signature = (
    layers, dipole, frequency_hz, point, *,
    tolerance=None, initial_n_max=None, initial_n_int=None, max_iterations=None,
    path=None, gamma=None, f_dsip=None, subtraction=None,
))]
#[allow(clippy::too_many_arguments)]
fn compute_fields(
    py: Python<'_>,
    layers: Vec<Layer>,
    dipole: &Dipole,
    frequency_hz: f64,
    point: (f64, f64, f64),
    tolerance: Option<f64>,
    initial_n_max: Option<usize>,
    initial_n_int: Option<usize>,
    max_iterations: Option<usize>,
    path: Option<&str>,
    gamma: Option<f64>,
    f_dsip: Option<f64>,
    subtraction: Option<&str>,
) -> PyResult<FieldResult> {
    let stack = build_stack(layers)?;
    let settings = build_settings(
        tolerance,
        initial_n_max,
        initial_n_int,
        max_iterations,
        path,
        gamma,
        f_dsip,
        subtraction,
    )?;
    let obs = CylPoint::new(point.0, point.1, point.2);
    let dipole = dipole.inner.clone();
    let result = py
        .allow_threads(|| solver::compute_fields(&stack, &dipole, frequency_hz, obs, &settings))
        .map_err(to_py_err)?;
    Ok(FieldResult { inner: result })
}

/// analytic_homogeneous(layers, dipole, frequency_hz, point)
///
/// Closed-form fields of the dipole in an unbounded medium; the stack must
/// be a single layer. Returns `((e_rho, e_phi, e_z), (h_rho, h_phi, h_z))`.
#[pyfunction]
fn analytic_homogeneous(
    layers: Vec<Layer>,
    dipole: &Dipole,
    frequency_hz: f64,
    point: (f64, f64, f64),
) -> PyResult<((C64, C64, C64), (C64, C64, C64))> {
    let stack = build_stack(layers)?;
    let obs = CylPoint::new(point.0, point.1, point.2);
    let (e, h) = solver::analytic_homogeneous(&stack, &dipole.inner, frequency_hz, obs)
        .map_err(to_py_err)?;
    Ok(((e[0], e[1], e[2]), (h[0], h[1], h[2])))
}

/// relative_error_db(reference, numeric)
///
/// `10·log10(|numeric − reference| / |reference|)`, clamped at −300 dB.
#[pyfunction]
fn relative_error_db(reference: C64, numeric: C64) -> f64 {
    solver::relative_error_db(reference, numeric)
}

#[pymodule]
fn cylstrata_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Layer>()?;
    m.add_class::<Dipole>()?;
    m.add_class::<FieldResult>()?;
    m.add_function(wrap_pyfunction!(compute_fields, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_homogeneous, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error_db, m)?)?;
    m.add("INCH", cylstrata::INCH)?;
    Ok(())
}
