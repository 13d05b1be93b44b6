//! Python bindings: the environment, its pure step functions, parameter
//! averaging, client selection and the experiment entry points.
//!
//! Structured values cross the boundary as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::de::DeserializeOwned;
use serde::Serialize;

use fedrl_core::env::{self, ActionIntensity, ActionLevels, Compartments, EnvConfig, EpiState, NUM_ACTIONS, OBS_DIM};
use fedrl_core::experiment::{self, Mode, RunConfig};
use fedrl_core::federation;
use fedrl_core::metrics::read_metrics;
use fedrl_core::nn::{self, Layout};
use fedrl_core::rng::{stream_rng, Stream};

fn py_err(e: fedrl_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(json_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(json_err)
}

/// Env config from an optional dict; absent keys take their defaults.
fn env_config(cfg: Option<&Bound<'_, PyAny>>) -> PyResult<EnvConfig> {
    let cfg: EnvConfig = match cfg {
        Some(c) => from_py(c)?,
        None => EnvConfig::default(),
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

fn intensity(a: [f64; NUM_ACTIONS]) -> PyResult<ActionIntensity> {
    ActionIntensity::new(a).map_err(py_err)
}

/// Epidemic decision environment.
#[pyclass(module = "fedrl")]
struct EpiEnv {
    inner: env::EpiEnv,
}

#[pymethods]
impl EpiEnv {
    #[new]
    #[pyo3(signature = (config=None, seed=0))]
    fn new(config: Option<&Bound<'_, PyAny>>, seed: u64) -> PyResult<Self> {
        let inner = env::EpiEnv::new(env_config(config)?, seed).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Returns `(observation, compartments)`.
    fn reset<'py>(&mut self, py: Python<'py>, seed: u64) -> PyResult<([f64; OBS_DIM], Bound<'py, PyAny>)> {
        let (obs, comp) = self.inner.reset(seed);
        Ok((obs.to_array(), to_py(py, &comp)?))
    }

    /// Steps with seven discrete levels in 0..4. Returns
    /// `(observation, reward, done, info)`.
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        levels: [u8; NUM_ACTIONS],
    ) -> PyResult<([f64; OBS_DIM], f64, bool, Bound<'py, PyAny>)> {
        let levels = ActionLevels::new(levels).map_err(py_err)?;
        let out = self.inner.step(&levels).map_err(py_err)?;
        Ok((out.observation.to_array(), out.reward, out.done, to_py(py, &out.info)?))
    }

    /// Steps with seven intensities in [0, 1].
    fn step_continuous<'py>(
        &mut self,
        py: Python<'py>,
        intensities: [f64; NUM_ACTIONS],
    ) -> PyResult<([f64; OBS_DIM], f64, bool, Bound<'py, PyAny>)> {
        let out = self.inner.step_continuous(&intensity(intensities)?).map_err(py_err)?;
        Ok((out.observation.to_array(), out.reward, out.done, to_py(py, &out.info)?))
    }

    #[getter]
    fn observation(&self) -> [f64; OBS_DIM] {
        self.inner.observation().to_array()
    }

    #[getter]
    fn compartments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.compartments())
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.config())
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn reward_ceiling(&self) -> f64 {
        self.inner.config().reward_ceiling()
    }
}

/// Flat network parameters with their layer widths.
#[pyclass(module = "fedrl", eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct ParamVector {
    inner: nn::ParamVector,
}

#[pymethods]
impl ParamVector {
    #[new]
    fn new(dims: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        let layout = Layout::new(dims).map_err(py_err)?;
        let inner = nn::ParamVector::new(layout, values).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn zeros(dims: Vec<usize>) -> PyResult<Self> {
        let layout = Layout::new(dims).map_err(py_err)?;
        Ok(Self {
            inner: nn::ParamVector::zeros(layout),
        })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        let inner = nn::ParamVector::from_bytes(data).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.layout().dims().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("ParamVector(dims={:?}, len={})", self.inner.layout().dims(), self.inner.len())
    }
}

/// Rates `[transmission, identification, death, reinfection]`.
#[pyfunction]
#[pyo3(signature = (intensities, compartments, config=None))]
fn compute_rates(
    intensities: [f64; NUM_ACTIONS],
    compartments: &Bound<'_, PyAny>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<[f64; OBS_DIM]> {
    let comp: Compartments = from_py(compartments)?;
    let rates = env::compute_rates(&intensity(intensities)?, &comp, &env_config(config)?).map_err(py_err)?;
    Ok(rates.to_array())
}

/// Next compartments under `rates`.
#[pyfunction]
fn step_transition<'py>(
    py: Python<'py>,
    compartments: &Bound<'py, PyAny>,
    rates: [f64; OBS_DIM],
) -> PyResult<Bound<'py, PyAny>> {
    let comp: Compartments = from_py(compartments)?;
    to_py(py, &env::step_transition(&comp, &EpiState::from_array(rates)))
}

/// Returns `(reward, health, economy)`.
#[pyfunction]
#[pyo3(signature = (next_infected, deaths, intensities, config=None))]
fn compute_reward(
    next_infected: f64,
    deaths: f64,
    intensities: [f64; NUM_ACTIONS],
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<(f64, f64, f64)> {
    let r = env::compute_reward(next_infected, deaths, &intensity(intensities)?, &env_config(config)?);
    Ok((r.reward, r.health, r.economy))
}

/// Elementwise mean of parameter vectors sharing one layout.
#[pyfunction]
fn average_params(params: Vec<ParamVector>) -> PyResult<ParamVector> {
    let list: Vec<nn::ParamVector> = params.into_iter().map(|p| p.inner).collect();
    let inner = nn::average_params(&list).map_err(py_err)?;
    Ok(ParamVector { inner })
}

/// The sorted client ids a run with master `seed` selects in `round`.
#[pyfunction]
fn select_clients(n: usize, k: usize, seed: u64, round: u64) -> PyResult<Vec<usize>> {
    let mut rng = stream_rng(seed, Stream::Selection, round);
    federation::select_clients(n, k, &mut rng).map_err(py_err)
}

/// The full default run configuration.
#[pyfunction]
fn default_config<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &RunConfig::default())
}

/// Runs an experiment and returns its summary. `config` is a dict in
/// the JSON config schema; `mode` is `fed`, `central` or `both`.
#[pyfunction]
#[pyo3(signature = (config, mode="both"))]
fn run_experiment<'py>(py: Python<'py>, config: &Bound<'py, PyAny>, mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (config,))?.extract()?;
    let cfg = experiment::parse_config(&text).map_err(py_err)?;
    let mode: Mode = mode.parse().map_err(py_err)?;
    let summary = py.detach(|| experiment::run_experiment(&cfg, mode)).map_err(py_err)?;
    to_py(py, &summary)
}

/// Compares the evaluation curves of two metrics files.
#[pyfunction]
fn compare_runs<'py>(py: Python<'py>, a: PathBuf, b: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let ra = read_metrics(&a).map_err(py_err)?;
    let rb = read_metrics(&b).map_err(py_err)?;
    to_py(py, &experiment::compare_runs(&ra, &rb).map_err(py_err)?)
}

/// Metrics file rows as dicts.
#[pyfunction]
fn load_metrics<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &read_metrics(&path).map_err(py_err)?)
}

#[pymodule]
fn fedrl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<EpiEnv>()?;
    m.add_class::<ParamVector>()?;
    m.add_function(wrap_pyfunction!(compute_rates, m)?)?;
    m.add_function(wrap_pyfunction!(step_transition, m)?)?;
    m.add_function(wrap_pyfunction!(compute_reward, m)?)?;
    m.add_function(wrap_pyfunction!(average_params, m)?)?;
    m.add_function(wrap_pyfunction!(select_clients, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare_runs, m)?)?;
    m.add_function(wrap_pyfunction!(load_metrics, m)?)?;
    Ok(())
}
