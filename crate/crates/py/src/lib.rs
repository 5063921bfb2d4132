use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::wasep::analytics::{self, LimitSpec, QvForm};
use ::wasep::engine::{EngineState, SimParams};
use ::wasep::harness::{self, ExperimentConfig, ExperimentKind, ObservableSpec};
use ::wasep::hydro::{self, DensityProfile};
use ::wasep::lattice::{ModelDef, ValidatedModel};
use ::wasep::observables::TestFunction;

fn err(e: ::wasep::Error) -> PyErr {
    match e {
        ::wasep::Error::Io { .. } | ::wasep::Error::IncompleteRun(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A test function on the real line; build with the static constructors.
#[pyclass(name = "TestFunction", module = "wasep", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTestFunction {
    inner: TestFunction,
}

#[pymethods]
impl PyTestFunction {
    /// (1 − ((u − center)/radius)²)^power on the support.
    #[staticmethod]
    #[pyo3(signature = (center, radius, power=4))]
    fn bump(center: f64, radius: f64, power: u32) -> PyResult<Self> {
        let inner = TestFunction::bump(center, radius, power);
        inner.validate().map_err(err)?;
        Ok(PyTestFunction { inner })
    }

    #[staticmethod]
    fn gaussian(center: f64, sigma: f64) -> PyResult<Self> {
        let inner = TestFunction::gaussian_density(center, sigma);
        inner.validate().map_err(err)?;
        Ok(PyTestFunction { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: TestFunction = serde_json::from_str(text).map_err(json_err)?;
        inner.validate().map_err(err)?;
        Ok(PyTestFunction { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn shifted(&self, shift: f64) -> Self {
        PyTestFunction {
            inner: self.inner.clone().shifted(shift),
        }
    }

    fn __call__(&self, u: f64) -> f64 {
        self.inner.eval(u)
    }

    fn l2_norm_squared(&self) -> f64 {
        self.inner.l2_norm_squared()
    }

    fn __repr__(&self) -> String {
        format!("TestFunction({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

fn build_model(model: &str) -> PyResult<Arc<ValidatedModel>> {
    let def = if model == "ssep" {
        ModelDef::ssep()
    } else if let Some(b) = model.strip_prefix("gradient:") {
        ModelDef::gradient(b.parse().map_err(|_| PyValueError::new_err(format!("bad b in `{model}`")))?)
    } else {
        serde_json::from_str(model).map_err(json_err)?
    };
    Ok(Arc::new(ValidatedModel::new(def.build().map_err(err)?).map_err(err)?))
}

/// Parameters of one process: torus of `torus_multiplier·n` sites, bias
/// a/n^gamma, stationary density rho. `model` is "ssep", "gradient:<b>" or a
/// model JSON document.
#[pyclass(name = "Params", module = "wasep", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: SimParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (n, gamma, a, rho, torus_multiplier=4, seed=0, model="ssep"))]
    fn new(n: usize, gamma: f64, a: f64, rho: f64, torus_multiplier: usize, seed: u64, model: &str) -> PyResult<Self> {
        let inner = SimParams::new(n, gamma, a, rho, build_model(model)?)
            .map_err(err)?
            .with_torus(torus_multiplier)
            .with_seed(seed);
        inner.validate().map_err(err)?;
        Ok(PyParams { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn sites(&self) -> usize {
        self.inner.len()
    }

    /// Thermodynamic functions at rho as a dict.
    fn thermo(&self) -> BTreeMap<&'static str, f64> {
        let t = self.inner.thermo();
        BTreeMap::from([
            ("chi", t.chi),
            ("beta", t.beta),
            ("beta_prime", t.beta_prime),
            ("beta_double_prime", t.beta_double_prime),
            ("phi_h", t.phi_h),
            ("phi_h_prime", t.phi_h_prime),
        ])
    }

    /// Expected number of jumps through a fixed bond per unit time under ν_ρ.
    fn stationary_bond_current(&self) -> f64 {
        self.inner.stationary_bond_current()
    }
}

/// One trajectory started from ν_ρ, advanced with `run_until`.
#[pyclass(name = "Engine", module = "wasep")]
struct PyEngine {
    inner: EngineState,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (params, index=0))]
    fn new(params: &PyParams, index: u64) -> PyResult<Self> {
        Ok(PyEngine {
            inner: EngineState::spawn_trajectory(&params.inner, index).map_err(err)?,
        })
    }

    fn run_until(&mut self, t: f64) -> PyResult<()> {
        self.inner.run_until(t).map_err(err)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn events(&self) -> u64 {
        self.inner.event_count()
    }

    fn occupations(&self) -> Vec<u8> {
        self.inner.config().as_slice().to_vec()
    }
}

/// Simulate trajectory `index` and sample the observables (a JSON list of
/// observable specs) on `grid`. Returns {name: [values]} plus "t".
#[pyfunction]
#[pyo3(signature = (params, observables, grid, index=0))]
fn simulate(params: &PyParams, observables: &str, grid: Vec<f64>, index: u64) -> PyResult<BTreeMap<String, Vec<f64>>> {
    let specs: Vec<ObservableSpec> = serde_json::from_str(observables).map_err(json_err)?;
    let run = harness::simulate_trajectory(&params.inner, &specs, &grid, index, None).map_err(err)?;
    let mut out = run.series.columns;
    out.insert("t".into(), run.series.times);
    Ok(out)
}

/// χ∫T_{t−s}H·G in the limit.
#[pyfunction]
fn ou_covariance(params: &PyParams, h: &PyTestFunction, g: &PyTestFunction, t: f64, s: f64) -> f64 {
    analytics::ou_covariance(&h.inner, &g.inner, t, s, &LimitSpec::from_params(&params.inner))
}

/// Current covariance; `conventional` halves the prefactor.
#[pyfunction]
#[pyo3(signature = (params, t, s, conventional=false))]
fn fbm_covariance(params: &PyParams, t: f64, s: f64, conventional: bool) -> f64 {
    let spec = LimitSpec::from_params(&params.inner);
    if conventional {
        analytics::fbm_covariance_conventional(t, s, &spec)
    } else {
        analytics::fbm_covariance(t, s, &spec)
    }
}

/// E⟨M(H)⟩_t; `stationary` drops the (1 + a/n^γ) factor.
#[pyfunction]
#[pyo3(signature = (params, h, t, stationary=false))]
fn qv_prediction(params: &PyParams, h: &PyTestFunction, t: f64, stationary: bool) -> PyResult<f64> {
    let form = if stationary { QvForm::Stationary } else { QvForm::AsDisplayed };
    analytics::qv_prediction(&h.inner, t, &params.inner, &params.inner.thermo(), form).map_err(err)
}

/// Evolve `profile` (values on a grid of spacing 1/n over the torus) to time t.
#[pyfunction]
#[pyo3(signature = (params, profile, t, safety=0.4))]
fn solve_burgers(params: &PyParams, profile: Vec<f64>, t: f64, safety: f64) -> PyResult<Vec<f64>> {
    let p = DensityProfile::new(1.0 / params.inner.n as f64, profile).map_err(err)?;
    let out = hydro::solve_burgers(&p, params.inner.model.polys(), params.inner.a, t, safety).map_err(err)?;
    Ok(out.values)
}

/// Run a CLI command from a config JSON document; returns the output directory.
#[pyfunction]
#[pyo3(signature = (command, config="{}", out=None, workers=None))]
fn run_command(command: &str, config: &str, out: Option<PathBuf>, workers: Option<usize>) -> PyResult<String> {
    let kind: ExperimentKind = serde_json::from_value(serde_json::Value::String(command.into())).map_err(json_err)?;
    let mut cfg: ExperimentConfig = serde_json::from_str(config).map_err(json_err)?;
    cfg.kind = kind;
    if let Some(o) = out {
        cfg.out = o;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let dir = match kind {
        ExperimentKind::Simulate => harness::cmd_simulate(&cfg).map_err(err)?.dir,
        ExperimentKind::Ensemble => harness::cmd_ensemble(&cfg).map_err(err)?.dir,
        ExperimentKind::Hydro => harness::cmd_hydro(&cfg).map_err(err)?.0.dir,
        ExperimentKind::CrossoverSweep => harness::cmd_crossover_sweep(&cfg).map_err(err)?.0.dir,
        ExperimentKind::CheckModel | ExperimentKind::Analyze => {
            return Err(PyValueError::new_err(format!("use check_model / analyze for `{command}`")))
        }
    };
    Ok(dir.display().to_string())
}

/// Analyze a finished ensemble run; returns the report as JSON text.
#[pyfunction]
fn analyze(run_dir: PathBuf) -> PyResult<String> {
    let report = harness::cmd_analyze(&run_dir).map_err(err)?;
    serde_json::to_string(&report).map_err(json_err)
}

/// Hypothesis checks of a model ("ssep", "gradient:<b>" or JSON); returns JSON text.
#[pyfunction]
#[pyo3(signature = (model="ssep", rho=0.5))]
fn check_model(model: &str, rho: f64) -> PyResult<String> {
    let def = if model == "ssep" {
        ModelDef::ssep()
    } else if let Some(b) = model.strip_prefix("gradient:") {
        ModelDef::gradient(b.parse().map_err(|_| PyValueError::new_err(format!("bad b in `{model}`")))?)
    } else {
        serde_json::from_str(model).map_err(json_err)?
    };
    let cfg = ExperimentConfig {
        model: def,
        rho,
        ..Default::default()
    };
    let report = harness::cmd_check_model(&cfg).map_err(err)?;
    serde_json::to_string(&report).map_err(json_err)
}

#[pymodule]
#[pyo3(name = "wasep")]
fn wasep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTestFunction>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(ou_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(qv_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(solve_burgers, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(check_model, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
