//! Python bindings for the fedsvm simulator.
//!
//! Exposes dataset generation/loading, the privacy calibration
//! formulas, and the config-driven experiment sweep. Build as a cdylib
//! and import as `fedsvm_py`; see `python/smoke_test.py` at the repo
//! root.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fedsvm::bench;
use fedsvm::dataset;
use fedsvm::privacy;
use fedsvm::svm;
use fedsvm::synth;
use fedsvm::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Contract(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Linear SVM parameters: nine weights and a bias.
#[pyclass(name = "Model", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: svm::ModelVector,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(weights: Vec<f64>, bias: f64) -> PyResult<Self> {
        if weights.len() != svm::FEATURE_DIM {
            return Err(PyValueError::new_err(format!(
                "expected {} weights, got {}",
                svm::FEATURE_DIM,
                weights.len()
            )));
        }
        let mut w = [0.0; svm::FEATURE_DIM];
        w.copy_from_slice(&weights);
        Ok(PyModel { inner: svm::ModelVector { weights: w, bias } })
    }

    #[staticmethod]
    fn zero() -> Self {
        PyModel { inner: svm::ModelVector::zero() }
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.to_vec()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.inner.bias
    }

    /// Predicted label (+1 malignant, -1 benign) for one feature vector.
    fn predict(&self, features: Vec<f64>) -> PyResult<i8> {
        let x = as_features(&features)?;
        Ok(svm::predict(&self.inner, &x))
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }
}

fn as_features(features: &[f64]) -> PyResult<[f64; svm::FEATURE_DIM]> {
    if features.len() != svm::FEATURE_DIM {
        return Err(PyValueError::new_err(format!(
            "expected {} features, got {}",
            svm::FEATURE_DIM,
            features.len()
        )));
    }
    let mut x = [0.0; svm::FEATURE_DIM];
    x.copy_from_slice(features);
    Ok(x)
}

fn as_records(features: Vec<Vec<f64>>, labels: Vec<i8>) -> PyResult<Vec<dataset::FeatureRecord>> {
    if features.len() != labels.len() {
        return Err(PyValueError::new_err("features and labels length mismatch"));
    }
    features
        .into_iter()
        .zip(labels)
        .map(|(f, label)| Ok(dataset::FeatureRecord { features: as_features(&f)?, label }))
        .collect()
}

/// Write a synthetic dataset in the UCI breast-cancer-wisconsin format.
#[pyfunction]
#[pyo3(signature = (path, seed=synth::CANONICAL_SEED))]
fn generate_dataset(path: PathBuf, seed: u64) -> PyResult<()> {
    synth::write_dataset(&path, seed).map_err(to_py_err)
}

/// Load, clean, and normalize a dataset file. Returns (features, labels).
#[pyfunction]
fn load_dataset(path: PathBuf) -> PyResult<(Vec<Vec<f64>>, Vec<i8>)> {
    let raw = dataset::load_raw(&path).map_err(to_py_err)?;
    let prepared = dataset::prepare(&raw).map_err(to_py_err)?;
    Ok(prepared.iter().map(|r| (r.features.to_vec(), r.label)).unzip())
}

/// Gaussian-mechanism noise scale on the aggregated update for
/// client-level (eps_round, delta_round)-DP per round.
#[pyfunction]
fn calibrate_sigma_eff(
    clip_bound: f64,
    n_clients: usize,
    eps_round: f64,
    delta_round: f64,
) -> PyResult<f64> {
    privacy::calibrate_sigma_eff(clip_bound, n_clients, eps_round, delta_round).map_err(to_py_err)
}

/// Per-client noise scale sigma_c = sigma_eff * sqrt(n).
#[pyfunction]
fn client_noise_sigma(sigma_eff: f64, n_clients: usize) -> f64 {
    privacy::client_noise_sigma(sigma_eff, n_clients)
}

/// Human-readable budget report for one privacy configuration.
#[pyfunction]
fn budget_report(
    epsilon_total: f64,
    delta_total: f64,
    clip_bound: f64,
    rounds: usize,
    n_clients: usize,
) -> PyResult<String> {
    privacy::budget_report(&privacy::PrivacySpec {
        epsilon_total,
        delta_total,
        clip_bound,
        rounds,
        n_clients,
    })
    .map_err(to_py_err)
}

/// Mean hinge loss of a model on (features, labels).
#[pyfunction]
fn hinge_loss(
    model: PyModel,
    features: Vec<Vec<f64>>,
    labels: Vec<i8>,
    lambda: f64,
) -> PyResult<f64> {
    let data = as_records(features, labels)?;
    svm::hinge_loss(&model.inner, &data, lambda).map_err(to_py_err)
}

/// Classification accuracy of a model on (features, labels).
#[pyfunction]
fn accuracy(model: PyModel, features: Vec<Vec<f64>>, labels: Vec<i8>) -> PyResult<f64> {
    let data = as_records(features, labels)?;
    svm::accuracy(&model.inner, &data).map_err(to_py_err)
}

/// Parse a TOML experiment config, run the sweep, write the CSV, and
/// return the number of rows written.
#[pyfunction]
#[pyo3(signature = (config_path, output_path=None, dataset_path=None))]
fn run_experiment(
    config_path: PathBuf,
    output_path: Option<PathBuf>,
    dataset_path: Option<PathBuf>,
) -> PyResult<usize> {
    let mut cfg = bench::parse_config(&config_path).map_err(to_py_err)?;
    if let Some(p) = dataset_path {
        cfg.dataset_path = p;
    }
    if let Some(p) = output_path {
        cfg.output_path = p;
    }
    let rows = bench::sweep_put(&cfg).map_err(to_py_err)?;
    bench::emit_csv(&rows, &cfg.output_path).map_err(to_py_err)?;
    Ok(rows.len())
}

#[pymodule]
fn fedsvm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_sigma_eff, m)?)?;
    m.add_function(wrap_pyfunction!(client_noise_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(budget_report, m)?)?;
    m.add_function(wrap_pyfunction!(hinge_loss, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
