//! Python bindings: protocol runs, process tomography and sweeps.

use nalgebra::Matrix2;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qed_core::config::RunConfigFile;
use qed_core::dynamics::SwapPhases;
use qed_core::experiments::{self as exp, Metric, PhaseMode, SweepRow, SweepSpec};
use qed_core::hilbert::QubitDensityMatrix;
use qed_core::protocol::{self as proto, Backend, Kappas, ProtocolPhases, Uncollapse};
use qed_core::tomography::{self as tomo, FidelityReport};
use qed_core::{QedError, C64};

create_exception!(qed_sim, InfeasibleUncollapseError, PyValueError);

fn py_err(e: QedError) -> PyErr {
    match e {
        QedError::InfeasibleUncollapse(_) => InfeasibleUncollapseError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for qed_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn backend(name: &str) -> PyResult<Backend> {
    name.parse().py()
}

fn phase_mode(name: &str) -> PyResult<PhaseMode> {
    match name {
        "none" => Ok(PhaseMode::None),
        "model" => Ok(PhaseMode::Model),
        "fit" => Ok(PhaseMode::Fit),
        other => Err(PyValueError::new_err(format!(
            "unknown phase mode {other:?}; expected none, model or fit"
        ))),
    }
}

fn input_index(label: &str) -> PyResult<usize> {
    exp::INPUT_LABELS.iter().position(|l| *l == label).ok_or_else(|| {
        PyValueError::new_err(format!("unknown input {label:?}; expected one of {:?}", exp::INPUT_LABELS))
    })
}

fn rows2(m: &Matrix2<C64>) -> Vec<Vec<C64>> {
    (0..2).map(|i| (0..2).map(|j| m[(i, j)]).collect()).collect()
}

fn matrix2(rows: &[Vec<C64>]) -> PyResult<Matrix2<C64>> {
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
        return Err(PyValueError::new_err("expected a 2x2 nested list"));
    }
    Ok(Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
}

fn swap_phases(t: Option<(f64, f64, f64)>) -> SwapPhases {
    t.map(|(entry, aux, completion)| SwapPhases { entry, aux, completion })
        .unwrap_or_default()
}

/// Protocol parameters; `p_u=None` tunes the un-collapsing strength to the
/// decay factors, `k2=None` derives the storage survival from `tau2_us`.
/// Phase triples are `(entry, aux, completion)` in radians.
#[pyclass(name = "ProtocolConfig", module = "qed_sim", from_py_object)]
#[derive(Clone)]
struct PyProtocolConfig {
    inner: proto::ProtocolConfig,
}

#[pymethods]
impl PyProtocolConfig {
    #[new]
    #[pyo3(signature = (
        p = 0.75, p_u = None, tau2_us = 3.0, storage = true,
        k1 = proto::DEFAULT_KAPPA_STEP, k2 = None, k3 = proto::DEFAULT_KAPPA_STEP,
        kphi = proto::DEFAULT_KAPPA_PHI, memory_t1_us = proto::DEFAULT_MEMORY_T1_US,
        idle_detuning_mhz = 0.0, resonator_truncation = 2,
        first_phases = None, storage_phases = None, second_phases = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        p: f64,
        p_u: Option<f64>,
        tau2_us: f64,
        storage: bool,
        k1: f64,
        k2: Option<f64>,
        k3: f64,
        kphi: f64,
        memory_t1_us: f64,
        idle_detuning_mhz: f64,
        resonator_truncation: usize,
        first_phases: Option<(f64, f64, f64)>,
        storage_phases: Option<(f64, f64, f64)>,
        second_phases: Option<(f64, f64, f64)>,
    ) -> PyResult<Self> {
        let inner = proto::ProtocolConfig {
            p,
            p_u: p_u.map_or(Uncollapse::Auto, Uncollapse::Fixed),
            tau2_us,
            storage_enabled: storage,
            kappas: Kappas { k1, k2, k3, kphi },
            phases: ProtocolPhases {
                first: swap_phases(first_phases),
                storage: swap_phases(storage_phases),
                second: swap_phases(second_phases),
            },
            idle_detuning_mhz,
            memory_t1_us,
            resonator_truncation,
            ..proto::ProtocolConfig::default()
        };
        inner.validate_channel().py()?;
        Ok(Self { inner })
    }

    /// Parameters of the `protocol` and `device` sections of a JSON run configuration.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfigFile::from_json(text).py()?.protocol_config(),
        })
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn tau2_us(&self) -> f64 {
        self.inner.tau2_us
    }

    #[getter]
    fn storage(&self) -> bool {
        self.inner.storage_enabled
    }

    /// Un-collapsing strength actually used.
    fn resolved_pu(&self) -> PyResult<f64> {
        self.inner.resolved_pu().py()
    }

    fn kappa2(&self) -> f64 {
        self.inner.kappa2()
    }

    fn net_phase(&self) -> f64 {
        proto::net_dynamic_phase(&self.inner)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        let pu = match c.p_u {
            Uncollapse::Auto => "auto".to_string(),
            Uncollapse::Fixed(x) => x.to_string(),
        };
        format!(
            "ProtocolConfig(p={}, p_u={pu}, tau2_us={}, storage={}, k1={}, k2={:?}, k3={}, kphi={})",
            c.p, c.tau2_us, c.storage_enabled, c.kappas.k1, c.kappas.k2, c.kappas.k3, c.kappas.kphi
        )
    }
}

#[pyclass(name = "ProtocolResult", module = "qed_sim", frozen)]
struct PyProtocolResult {
    inner: proto::ProtocolResult,
}

#[pymethods]
impl PyProtocolResult {
    /// Unnormalized final state; its trace is the selection probability.
    #[getter]
    fn rho_unnormalized(&self) -> Vec<Vec<C64>> {
        rows2(self.inner.rho.matrix())
    }

    /// Normalized final state, or `None` when nothing is selected.
    #[getter]
    fn rho(&self) -> Option<Vec<Vec<C64>>> {
        self.inner.normalized().ok().map(|r| rows2(r.matrix()))
    }

    #[getter]
    fn p_dn(&self) -> f64 {
        self.inner.p_dn
    }

    #[getter]
    fn p_u(&self) -> f64 {
        self.inner.p_u
    }

    #[getter]
    fn net_phase(&self) -> f64 {
        self.inner.net_phase
    }

    #[getter]
    fn no_jump_probability(&self) -> f64 {
        self.inner.no_jump_probability()
    }

    #[getter]
    fn jump_probability(&self) -> f64 {
        self.inner.jump_probability()
    }

    fn __repr__(&self) -> String {
        format!("ProtocolResult(p_dn={}, p_u={})", self.inner.p_dn, self.inner.p_u)
    }
}

/// Single-qubit process matrix in the `{I, X, Y, Z}` basis.
#[pyclass(name = "ProcessMatrix", module = "qed_sim", frozen)]
struct PyProcessMatrix {
    inner: tomo::ProcessMatrix,
}

fn ideal_unitary(name: &str) -> PyResult<Matrix2<C64>> {
    let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    match name {
        "pi_x" => Ok(Matrix2::new(z, o, o, z)),
        "identity" => Ok(Matrix2::identity()),
        other => Err(PyValueError::new_err(format!("unknown ideal {other:?}; expected pi_x or identity"))),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &FidelityReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("F", r.f)?;
    d.set_item("F_av", r.f_av)?;
    d.set_item("F_av_prime", r.f_av_prime)?;
    d.set_item("F_av_sc", r.f_av_sc)?;
    d.set_item("F_av_prime_sc", r.f_av_prime_sc)?;
    d.set_item("trace_chi", r.trace)?;
    Ok(d)
}

#[pymethods]
impl PyProcessMatrix {
    /// Linear-inversion reconstruction from the unnormalized outputs of the
    /// inputs `g`, `g-ie`, `g+e`, `e`.
    #[staticmethod]
    #[pyo3(signature = (outputs, project_psd = false))]
    fn from_outputs(outputs: Vec<Vec<Vec<C64>>>, project_psd: bool) -> PyResult<Self> {
        let outs = outputs
            .iter()
            .map(|m| QubitDensityMatrix::new(matrix2(m)?).py())
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: tomo::reconstruct_chi(&tomo::input_states(), &outs, project_psd).py()?,
        })
    }

    #[staticmethod]
    fn pi_x() -> Self {
        Self {
            inner: tomo::ProcessMatrix::pi_x(),
        }
    }

    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: tomo::ProcessMatrix::identity(),
        }
    }

    #[getter]
    fn chi(&self) -> Vec<Vec<C64>> {
        (0..4).map(|n| (0..4).map(|m| self.inner.get(n, m)).collect()).collect()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn normalized(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.normalized().py()?,
        })
    }

    fn min_eigenvalue(&self) -> f64 {
        self.inner.min_eigenvalue()
    }

    fn apply(&self, rho: Vec<Vec<C64>>) -> PyResult<Vec<Vec<C64>>> {
        Ok(rows2(&self.inner.apply(&matrix2(&rho)?)))
    }

    /// Phase-compensated copy, `Rz(phi) chi Rz(phi)^dagger`.
    fn compensate_phase(&self, phi: f64) -> Self {
        use tomo::PhaseCompensation;
        Self {
            inner: self.inner.compensate_phase(phi),
        }
    }

    #[pyo3(signature = (ideal = "pi_x"))]
    fn fidelities<'py>(&self, py: Python<'py>, ideal: &str) -> PyResult<Bound<'py, PyDict>> {
        let report = FidelityReport::new(&self.inner, &ideal_unitary(ideal)?).py()?;
        report_dict(py, &report)
    }
}

fn with_input(config: &PyProtocolConfig, input: &str) -> PyResult<proto::ProtocolConfig> {
    let (a, b) = tomo::input_amplitudes()[input_index(input)?];
    Ok(config.inner.with_input(a, b))
}

/// Protocol run on a tomography input (`g`, `e`, `g+e`, `g-ie`).
#[pyfunction]
#[pyo3(signature = (config, input = "g", backend = "analytic"))]
fn run(config: PyRef<'_, PyProtocolConfig>, input: &str, backend: &str) -> PyResult<PyProtocolResult> {
    let cfg = with_input(&config, input)?;
    Ok(PyProtocolResult {
        inner: proto::run(&cfg, self::backend(backend)?).py()?,
    })
}

/// Protocol run on `alpha |g> + beta |e>`.
#[pyfunction]
#[pyo3(signature = (config, alpha, beta, backend = "analytic"))]
fn run_state(config: PyRef<'_, PyProtocolConfig>, alpha: C64, beta: C64, backend: &str) -> PyResult<PyProtocolResult> {
    let cfg = config.inner.with_input(alpha, beta);
    Ok(PyProtocolResult {
        inner: proto::run(&cfg, self::backend(backend)?).py()?,
    })
}

/// Storage without detection, sharing the decay of `config`.
#[pyfunction]
#[pyo3(signature = (config, input = "g", backend = "analytic"))]
fn free_decay(config: PyRef<'_, PyProtocolConfig>, input: &str, backend: &str) -> PyResult<PyProtocolResult> {
    let cfg = with_input(&config, input)?;
    Ok(PyProtocolResult {
        inner: proto::free_decay_baseline(&cfg, self::backend(backend)?).py()?,
    })
}

/// Reconstructed, phase-compensated process matrix and its fidelities.
#[pyfunction]
#[pyo3(signature = (config, backend = "analytic", phase_mode = "model", free_decay = false))]
fn qpt<'py>(
    py: Python<'py>,
    config: PyRef<'_, PyProtocolConfig>,
    backend: &str,
    phase_mode: &str,
    free_decay: bool,
) -> PyResult<(PyProcessMatrix, Bound<'py, PyDict>)> {
    let (b, mode) = (self::backend(backend)?, self::phase_mode(phase_mode)?);
    let (chi, report) = if free_decay {
        exp::free_decay_process(&config.inner, b, mode)
    } else {
        exp::qed_process(&config.inner, b, mode)
    }
    .py()?;
    Ok((PyProcessMatrix { inner: chi }, report_dict(py, &report)?))
}

/// `p_u = 1 - (1 - p) k1 k2 / k3`.
#[pyfunction]
fn compute_pu(p: f64, k1: f64, k2: f64, k3: f64) -> PyResult<f64> {
    proto::compute_pu(p, k1, k2, k3).py()
}

#[allow(clippy::too_many_arguments)]
fn sweep_rows(
    figure: &str,
    backend: &str,
    metric: &str,
    shots: u64,
    seed: u64,
    p_grid: Option<Vec<f64>>,
    tau2_us: Option<Vec<f64>>,
    config_json: Option<&str>,
) -> PyResult<Vec<SweepRow>> {
    let base = match config_json {
        Some(text) => RunConfigFile::from_json(text).py()?,
        None => RunConfigFile::default(),
    };
    let mut spec: SweepSpec = base.sweep_spec();
    spec.backend = self::backend(backend)?;
    spec.metric = metric.parse::<Metric>().py()?;
    spec.shots = shots;
    spec.seed = seed;
    if let Some(g) = p_grid {
        spec.p_grid = g;
    }
    if let Some(t) = tau2_us {
        spec.tau2_us = t;
    }
    match figure {
        "fig2b" => exp::fig2b_sweep(&spec),
        "fig3a" => exp::fig3a_sweep(&spec),
        "fig4" => exp::fig4_pdn(&spec),
        "figS1" | "figs1" => exp::figs1_sweep(&spec),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown sweep {other:?}; expected fig2b, fig3a, fig4 or figS1"
            )))
        }
    }
    .py()
}

/// Sweep rows as dictionaries with the CSV column names plus `status`.
#[pyfunction]
#[pyo3(signature = (figure, backend = "analytic", metric = "F", shots = 0, seed = 0, p_grid = None, tau2_us = None, config_json = None))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    figure: &str,
    backend: &str,
    metric: &str,
    shots: u64,
    seed: u64,
    p_grid: Option<Vec<f64>>,
    tau2_us: Option<Vec<f64>>,
    config_json: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = sweep_rows(figure, backend, metric, shots, seed, p_grid, tau2_us, config_json)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("p", r.p)?;
            d.set_item("p_u", r.p_u)?;
            d.set_item("tau2_us", r.tau2_us)?;
            d.set_item("metric", &r.metric)?;
            d.set_item("value", r.value)?;
            d.set_item("P_DN", r.p_dn)?;
            d.set_item("stderr", r.stderr)?;
            d.set_item("status", format!("{:?}", r.status))?;
            Ok(d)
        })
        .collect()
}

/// The same sweep rendered as CSV text.
#[pyfunction]
#[pyo3(signature = (figure, backend = "analytic", metric = "F", shots = 0, seed = 0, p_grid = None, tau2_us = None, config_json = None))]
#[allow(clippy::too_many_arguments)]
fn sweep_csv(
    figure: &str,
    backend: &str,
    metric: &str,
    shots: u64,
    seed: u64,
    p_grid: Option<Vec<f64>>,
    tau2_us: Option<Vec<f64>>,
    config_json: Option<&str>,
) -> PyResult<String> {
    let rows = sweep_rows(figure, backend, metric, shots, seed, p_grid, tau2_us, config_json)?;
    let mut buf = Vec::new();
    exp::write_csv(&rows, &mut buf).py()?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Normalized outputs for the four inputs, free decay then QED, uncompensated.
#[pyfunction]
#[pyo3(signature = (p = 0.75, tau2_us = 3.0, backend = "analytic"))]
fn densities<'py>(py: Python<'py>, p: f64, tau2_us: f64, backend: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let panels =
        exp::fig3b_densities(&proto::ProtocolConfig::default(), self::backend(backend)?, p, tau2_us).py()?;
    panels
        .iter()
        .map(|d| {
            let out = PyDict::new(py);
            out.set_item("input", d.input)?;
            out.set_item(
                "pipeline",
                match d.pipeline {
                    exp::Pipeline::Qed => "qed",
                    exp::Pipeline::FreeDecay => "free_decay",
                },
            )?;
            out.set_item("rho", rows2(d.rho.matrix()))?;
            out.set_item("p_dn", d.p_dn)?;
            Ok(out)
        })
        .collect()
}

#[pymodule]
mod qed_sim {
    use super::*;

    #[pymodule_export]
    use super::{
        compute_pu, densities, free_decay, qpt, run, run_state, sweep, sweep_csv, PyProcessMatrix,
        PyProtocolConfig, PyProtocolResult,
    };

    #[pymodule_init]
    fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
        m.add("InfeasibleUncollapseError", m.py().get_type::<InfeasibleUncollapseError>())?;
        m.add("INPUT_LABELS", exp::INPUT_LABELS.to_vec())?;
        m.add("__version__", env!("CARGO_PKG_VERSION"))?;
        Ok(())
    }
}
