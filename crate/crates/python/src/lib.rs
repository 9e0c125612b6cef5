//! Python bindings for the coldcavity simulator.
//!
//! Parameters and traces are wrapped as classes; steady states, switches and
//! cycle reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use coldcavity::dynamics::{self, ScanProtocol};
use coldcavity::error::Error;
use coldcavity::model::{self, SystemState, Variant};
use coldcavity::{presets, steady, units, zeeman};
use num_complex::Complex64;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Dimensionless model constants.
#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (delta, gamma_cav, kappa, cooperativity, phi0=0.0, drive=0.0, beta=0.0, gamma_p=0.0, variant="simple"))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        delta: f64,
        gamma_cav: f64,
        kappa: f64,
        cooperativity: f64,
        phi0: f64,
        drive: f64,
        beta: f64,
        gamma_p: f64,
        variant: &str,
    ) -> PyResult<Self> {
        let variant: Variant = variant.parse().map_err(to_py)?;
        let inner = model::ModelParams::new(delta, gamma_cav, kappa, cooperativity)
            .with_phi0(phi0)
            .with_drive(drive)
            .with_pumping(beta, gamma_p)
            .with_variant(variant);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn phi0(&self) -> f64 {
        self.inner.phi0
    }

    #[getter]
    fn gamma_cav(&self) -> f64 {
        self.inner.gamma_cav
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn cooperativity(&self) -> f64 {
        self.inner.cooperativity
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn gamma_p(&self) -> f64 {
        self.inner.gamma_p
    }

    #[getter]
    fn drive(&self) -> f64 {
        self.inner.drive
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.to_string()
    }

    /// Copy with a different geometric phase.
    fn with_phi0(&self, phi0: f64) -> Self {
        Self { inner: self.inner.with_phi0(phi0) }
    }

    /// Copy with a different input amplitude.
    fn with_drive(&self, drive: f64) -> Self {
        Self { inner: self.inner.with_drive(drive) }
    }

    /// Copy whose drive gives `intensity` on resonance in the empty cavity.
    fn with_resonant_intensity(&self, intensity: f64) -> Self {
        Self { inner: self.inner.with_drive(self.inner.drive_for_resonant_intensity(intensity)) }
    }

    fn resonant_intensity(&self) -> f64 {
        self.inner.resonant_intensity()
    }

    fn linear_phase(&self) -> PyResult<f64> {
        self.inner.linear_phase().map_err(to_py)
    }

    fn kerr_coefficient(&self) -> PyResult<f64> {
        self.inner.kerr_coefficient().map_err(to_py)
    }

    /// Time derivative of `[Re a, Im a, p]`.
    fn rhs(&self, y: [f64; 3]) -> [f64; 3] {
        self.inner.rhs_real(&y)
    }

    fn jacobian(&self, y: [f64; 3]) -> [[f64; 3]; 3] {
        self.inner.jacobian_real(&y)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(delta={}, gamma_cav={}, kappa={}, cooperativity={}, phi0={}, drive={}, beta={}, gamma_p={}, variant='{}')",
            p.delta, p.gamma_cav, p.kappa, p.cooperativity, p.phi0, p.drive, p.beta, p.gamma_p, p.variant
        )
    }
}

/// Sampled trajectory of one run.
#[pyclass(name = "Trace")]
struct PyTrace {
    inner: dynamics::ScanTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn output_power(&self) -> Vec<f64> {
        self.inner.output_power.clone()
    }

    #[getter]
    fn intensity(&self) -> Vec<f64> {
        self.inner.intensity.clone()
    }

    #[getter]
    fn orientation(&self) -> Vec<f64> {
        self.inner.orientation.clone()
    }

    #[getter]
    fn phi_cav(&self) -> Vec<f64> {
        self.inner.phi_cav.clone()
    }

    #[getter]
    fn phi0(&self) -> Vec<f64> {
        self.inner.phi0.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Abrupt jumps of the output power.
    fn switches<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        dynamics::detect_switches(&self.inner)
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("time", e.time)?;
                d.set_item("phi0", e.phi0)?;
                d.set_item("index", e.index)?;
                let dir = match e.direction {
                    dynamics::SwitchDirection::Up => "up",
                    dynamics::SwitchDirection::Down => "down",
                };
                d.set_item("direction", dir)?;
                Ok(d)
            })
            .collect()
    }

    /// Periodicity of the output power after discarding `settle_fraction`.
    #[pyo3(signature = (settle_fraction=0.3))]
    fn limit_cycle<'py>(&self, py: Python<'py>, settle_fraction: f64) -> PyResult<Bound<'py, PyDict>> {
        let c = dynamics::detect_limit_cycle(&self.inner, settle_fraction).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("detected", c.detected)?;
        d.set_item("period", c.period)?;
        d.set_item("frequency", c.frequency)?;
        d.set_item("amplitude", c.amplitude)?;
        d.set_item("window", c.window)?;
        d.set_item("peaks", c.peaks)?;
        d.set_item("dispersion", c.dispersion)?;
        Ok(d)
    }
}

fn fixed_point_dict<'py>(py: Python<'py>, fp: &steady::FixedPoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("intensity", fp.intensity)?;
    d.set_item("orientation", fp.orientation)?;
    d.set_item("phase", fp.phase)?;
    d.set_item("field", fp.field)?;
    d.set_item("eigenvalues", fp.eigenvalues.to_vec())?;
    d.set_item("stability", fp.stability.label())?;
    d.set_item("multiplicity", fp.multiplicity)?;
    Ok(d)
}

/// Steady states sorted by intensity, each a dict with its stability class.
#[pyfunction]
fn find_fixed_points<'py>(py: Python<'py>, params: &PyModelParams) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let points = py.detach(|| steady::find_fixed_points(&params.inner)).map_err(to_py)?;
    points.iter().map(|fp| fixed_point_dict(py, fp)).collect()
}

/// Stability label of a 3-element spectrum.
#[pyfunction]
fn classify_stability(eigenvalues: Vec<Complex64>) -> &'static str {
    steady::classify_stability(&eigenvalues).label()
}

#[pyfunction]
fn bistability_threshold(params: &PyModelParams) -> PyResult<f64> {
    steady::bistability_threshold(&params.inner).map_err(to_py)
}

#[pyfunction]
fn kerr_cusp_intensity(params: &PyModelParams) -> PyResult<f64> {
    steady::kerr_cusp_intensity(&params.inner).map_err(to_py)
}

/// Integrates from `initial = (Re a, Im a, p)`, at fixed `phi0_start` or, if
/// `phi0_end` is given, along a linear ramp.
#[pyfunction]
#[pyo3(signature = (params, duration, samples, phi0_start=None, phi0_end=None, initial=(0.0, 0.0, 0.0), tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    py: Python<'_>,
    params: &PyModelParams,
    duration: f64,
    samples: usize,
    phi0_start: Option<f64>,
    phi0_end: Option<f64>,
    initial: (f64, f64, f64),
    tol: f64,
) -> PyResult<PyTrace> {
    let start = phi0_start.unwrap_or(params.inner.phi0);
    let protocol = match phi0_end {
        Some(end) => ScanProtocol::linear_ramp(start, end, duration, samples),
        None => ScanProtocol::static_phase(start, duration, samples),
    };
    let state = SystemState::new(Complex64::new(initial.0, initial.1), initial.2, 0.0);
    let trace = py
        .detach(|| dynamics::integrate(&params.inner, &protocol, &state, tol))
        .map_err(to_py)?;
    Ok(PyTrace { inner: trace })
}

#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    presets::PRESET_NAMES.to_vec()
}

/// Parameters of a named preset.
#[pyfunction]
fn preset_params(name: &str) -> PyResult<PyModelParams> {
    let s = presets::preset_scenario(name).map_err(to_py)?;
    Ok(PyModelParams { inner: s.params })
}

/// Runs a named preset as configured; ramps with a round trip return the
/// forward and backward legs, everything else a single trace.
#[pyfunction]
#[pyo3(signature = (name, tol=1e-8))]
fn run_preset(py: Python<'_>, name: &str, tol: f64) -> PyResult<Vec<PyTrace>> {
    let s = presets::preset_scenario(name).map_err(to_py)?;
    let traces = py
        .detach(|| {
            if s.round_trip && s.protocol.kind == dynamics::ScanKind::LinearPhaseRamp {
                dynamics::hysteresis_loop(&s.params, &s.protocol, &s.initial, tol).map(|(f, b)| vec![f, b])
            } else {
                dynamics::integrate(&s.params, &s.protocol, &s.initial, tol).map(|t| vec![t])
            }
        })
        .map_err(to_py)?;
    Ok(traces.into_iter().map(|inner| PyTrace { inner }).collect())
}

/// Optical pumping coefficient β from the σ+ rate equations.
#[pyfunction]
fn pumping_beta(py: Python<'_>, intensity: f64, delta: f64) -> PyResult<f64> {
    py.detach(|| zeeman::pumping_beta(intensity, delta)).map_err(to_py)
}

/// Stretched-state population `N(t)` from a uniform ground state.
#[pyfunction]
#[pyo3(signature = (intensity, delta, t_end, samples=2001))]
fn pumping_curve(py: Python<'_>, intensity: f64, delta: f64, t_end: f64, samples: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let start = zeeman::SublevelPopulations::uniform_ground();
    let traj = py
        .detach(|| zeeman::evolve_populations(&start, intensity, delta, t_end, samples, false))
        .map_err(to_py)?;
    Ok((traj.times, traj.stretched))
}

/// Converts laboratory quantities (SI) to model parameters. Keys not given
/// keep their default values.
#[pyfunction]
#[pyo3(signature = (**overrides))]
fn to_dimensionless(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<PyModelParams> {
    let mut cfg = units::PhysicalConfig::default();
    if let Some(kw) = overrides {
        for (key, value) in kw.iter() {
            let key: String = key.extract()?;
            let slot = match key.as_str() {
                "gamma_over_2pi" => &mut cfg.gamma_over_2pi,
                "wavelength" => &mut cfg.wavelength,
                "cavity_length" => &mut cfg.cavity_length,
                "input_transmission" => &mut cfg.input_transmission,
                "extra_loss" => &mut cfg.extra_loss,
                "waist" => &mut cfg.waist,
                "atom_number" => &mut cfg.atom_number,
                "atomic_detuning" => &mut cfg.atomic_detuning,
                "input_power" => &mut cfg.input_power,
                "dipole" => {
                    cfg.dipole = Some(value.extract()?);
                    continue;
                }
                "saturation_intensity" => {
                    cfg.saturation_intensity = Some(value.extract()?);
                    continue;
                }
                other => return Err(PyValueError::new_err(format!("unknown physical key `{other}`"))),
            };
            *slot = value.extract()?;
        }
    }
    let inner = units::to_dimensionless(&cfg).map_err(to_py)?;
    Ok(PyModelParams { inner })
}

#[pymodule]
fn coldcavity_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(find_fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(classify_stability, m)?)?;
    m.add_function(wrap_pyfunction!(bistability_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(kerr_cusp_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset_params, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(pumping_beta, m)?)?;
    m.add_function(wrap_pyfunction!(pumping_curve, m)?)?;
    m.add_function(wrap_pyfunction!(to_dimensionless, m)?)?;
    Ok(())
}
