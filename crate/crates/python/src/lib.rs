//! Python module `mlbatch`.
//!
//! Matrices cross the boundary as lists of rows. Errors map to `ValueError`
//! for bad arguments and `IOError` for unreadable inputs.

use mlbatch_core as core;
use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use core::data::{load_arff, load_csv, FoldSplit, LabelSpec};
use core::experiment::run_id;
use core::metrics::{self, WilcoxonMethod};
use core::selector::{self, ChainContext, SelectorConfig, Strategy};
use core::synthetic::{generate, SyntheticConfig};
use core::trainer::{self, TrainConfig};

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix<T: Copy>(rows: Vec<Vec<T>>, what: &str) -> PyResult<Array2<T>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err(format!("{what}: rows have different lengths")));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn rows<T: Copy>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse_strategy(name: &str) -> PyResult<Strategy> {
    name.parse().map_err(to_py)
}

fn report_dict<'py>(py: Python<'py>, r: &core::MetricReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for kind in core::MetricKind::ALL {
        d.set_item(kind.name(), r.get(kind))?;
    }
    Ok(d)
}

/// Multi-label dataset with real features and binary labels.
#[pyclass(name = "Dataset", module = "mlbatch", frozen)]
struct PyDataset {
    inner: core::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(features: Vec<Vec<f64>>, labels: Vec<Vec<u8>>) -> PyResult<Self> {
        let inner = core::Dataset::from_arrays(matrix(features, "features")?, matrix(labels, "labels")?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// `labels` is a label list file or a trailing label count.
    #[staticmethod]
    fn load_arff(path: &str, labels: &str) -> PyResult<Self> {
        let inner = load_arff(path, &LabelSpec::parse(labels)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load_csv(path: &str, label_count: usize) -> PyResult<Self> {
        Ok(Self {
            inner: load_csv(path, label_count).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n=2000, d=20, q=10, rare_labels=2, rare_rate=0.02, noise=0.5))]
    fn synthetic(seed: u64, n: usize, d: usize, q: usize, rare_labels: usize, rare_rate: f64, noise: f64) -> PyResult<Self> {
        let cfg = SyntheticConfig {
            n,
            d,
            q,
            rare_labels,
            rare_rate,
            noise,
            ..SyntheticConfig::default()
        };
        Ok(Self {
            inner: generate(&cfg, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn n_instances(&self) -> usize {
        self.inner.n_instances()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn n_labels(&self) -> usize {
        self.inner.n_labels()
    }

    #[getter]
    fn label_names(&self) -> Vec<String> {
        self.inner.label_names().to_vec()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        rows(self.inner.features())
    }

    fn labels(&self) -> Vec<Vec<u8>> {
        rows(self.inner.labels())
    }

    /// `{"card": ..., "dens": ...}`
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("card", s.card)?;
        d.set_item("dens", s.dens)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, d={}, q={})",
            self.inner.n_instances(),
            self.inner.n_features(),
            self.inner.n_labels()
        )
    }
}

/// Global and local imbalance quantities of a training set.
#[pyclass(name = "ImbalanceProfile", module = "mlbatch", frozen)]
struct PyProfile {
    inner: core::ImbalanceProfile,
}

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (dataset, k=5))]
    fn new(dataset: &PyDataset, k: usize) -> PyResult<Self> {
        let ds = &dataset.inner;
        Ok(Self {
            inner: core::ImbalanceProfile::build(ds.features(), ds.labels(), k).map_err(to_py)?,
        })
    }

    #[getter]
    fn irlbl(&self) -> Vec<f64> {
        self.inner.irlbl.clone()
    }

    #[getter]
    fn mean_ir(&self) -> f64 {
        self.inner.mean_ir
    }

    #[getter]
    fn minority_mask(&self) -> Vec<bool> {
        self.inner.minority_mask.clone()
    }

    #[getter]
    fn b_matrix(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.b_matrix)
    }

    #[getter]
    fn s_matrix(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.s_matrix)
    }

    #[getter]
    fn epsilon(&self) -> Vec<f64> {
        self.inner.epsilon.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn adjacency(&self) -> Vec<Vec<f64>> {
        rows(self.inner.adjacency.matrix())
    }
}

/// Stateful batch selector over `n` training instances.
#[pyclass(name = "BatchSelector", module = "mlbatch")]
struct PySelector {
    inner: selector::BatchSelector,
}

#[pymethods]
impl PySelector {
    /// `dataset` supplies the label structure for `adaptive-chain`;
    /// `weights` default to ones.
    #[new]
    #[pyo3(signature = (strategy, n, batch_size=128, pressure=8.0, warmup_epochs=3, seed=0, weights=None, dataset=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        strategy: &str,
        n: usize,
        batch_size: usize,
        pressure: f64,
        warmup_epochs: usize,
        seed: u64,
        weights: Option<Vec<f64>>,
        dataset: Option<&PyDataset>,
    ) -> PyResult<Self> {
        let chain = match dataset {
            Some(ds) => {
                let labels = ds.inner.labels().clone();
                let irlbl = core::imbalance::irlbl(&labels).map_err(to_py)?;
                let adjacency = core::imbalance::label_adjacency(&labels);
                Some(ChainContext::new(labels, irlbl, adjacency, ds.inner.stats().card).map_err(to_py)?)
            }
            None => None,
        };
        let config = SelectorConfig {
            batch_size,
            pressure,
            warmup_epochs,
            seed,
        };
        let inner = selector::BatchSelector::new(parse_strategy(strategy)?, n, config, weights.unwrap_or_else(|| vec![1.0; n]), chain)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Indices of the next batch.
    fn next_batch(&mut self) -> PyResult<Vec<usize>> {
        Ok(self.inner.next_batch().map_err(to_py)?.indices)
    }

    fn record_losses(&mut self, indices: Vec<usize>, losses: Vec<f64>) -> PyResult<()> {
        self.inner.record_losses(&indices, &losses).map_err(to_py)
    }

    #[getter]
    fn probabilities(&self) -> Vec<f64> {
        self.inner.state().probabilities().to_vec()
    }

    #[getter]
    fn in_warmup(&self) -> bool {
        self.inner.in_warmup()
    }

    #[getter]
    fn batches_per_epoch(&self) -> usize {
        self.inner.batches_per_epoch()
    }
}

/// Fold id of every instance.
#[pyfunction]
#[pyo3(signature = (n, folds=5, seed=0))]
fn kfold(n: usize, folds: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(FoldSplit::new(n, folds, seed).map_err(to_py)?.assignments)
}

#[pyfunction]
fn quantize(weighted_loss: Vec<f64>) -> Vec<usize> {
    selector::quantize(&weighted_loss)
}

#[pyfunction]
#[pyo3(signature = (levels, pressure=8.0))]
fn selection_probabilities(levels: Vec<usize>, pressure: f64) -> Vec<f64> {
    selector::selection_probabilities(&levels, pressure)
}

#[pyfunction]
#[pyo3(signature = (loss, pressure=8.0))]
fn rank_probabilities(loss: Vec<f64>, pressure: f64) -> Vec<f64> {
    selector::rank_probabilities(&loss, pressure)
}

/// All six metrics as a dict; Macro-AUC is NaN when no label has both classes.
#[pyfunction]
#[pyo3(signature = (scores, labels, threshold=0.5))]
fn evaluate<'py>(py: Python<'py>, scores: Vec<Vec<f64>>, labels: Vec<Vec<u8>>, threshold: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = metrics::evaluate(&matrix(scores, "scores")?, &matrix(labels, "labels")?, threshold).map_err(to_py)?;
    report_dict(py, &r)
}

/// Two-sided Wilcoxon signed-rank test of paired samples.
#[pyfunction]
#[pyo3(signature = (x, y, method="auto"))]
fn wilcoxon<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>, method: &str) -> PyResult<Bound<'py, PyDict>> {
    let method = match method {
        "auto" => WilcoxonMethod::Auto,
        "exact" => WilcoxonMethod::Exact,
        "normal" => WilcoxonMethod::Normal,
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    let w = metrics::wilcoxon_signed_rank_with(&x, &y, method).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("statistic", w.statistic)?;
    d.set_item("p_value", w.p_value)?;
    d.set_item("w_plus", w.w_plus)?;
    d.set_item("w_minus", w.w_minus)?;
    d.set_item("n_nonzero", w.n_nonzero)?;
    Ok(d)
}

/// Trains one model on fold `fold` and returns its log as a dict.
#[pyfunction]
#[pyo3(signature = (dataset, strategy="adaptive", fold=0, folds=5, seed=0, epochs=50, batch_size=128, pressure=8.0, warmup_epochs=3, k=5, learning_rate=1e-3, standardize=false))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    strategy: &str,
    fold: usize,
    folds: usize,
    seed: u64,
    epochs: usize,
    batch_size: usize,
    pressure: f64,
    warmup_epochs: usize,
    k: usize,
    learning_rate: f64,
    standardize: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let strategy = parse_strategy(strategy)?;
    let split = FoldSplit::new(dataset.inner.n_instances(), folds, seed)
        .and_then(|f| f.split(fold, 0.1, seed))
        .map_err(to_py)?;
    let config = TrainConfig {
        strategy,
        epochs,
        batch_size,
        pressure,
        warmup_epochs,
        k,
        learning_rate,
        seed,
        standardize,
        ..TrainConfig::default()
    };
    let ds = dataset.inner.clone();
    let (_, log) = py.detach(move || trainer::train(&ds, &split, &config)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("run_id", run_id(strategy, fold, seed))?;
    d.set_item("best_epoch", log.best_epoch)?;
    d.set_item("test", report_dict(py, &log.test)?)?;
    d.set_item("epoch_train_loss", log.epochs.iter().map(|e| e.train_loss).collect::<Vec<_>>())?;
    d.set_item("batch_train_loss", log.batches.iter().map(|b| b.train_loss).collect::<Vec<_>>())?;
    d.set_item(
        "validation_macro_auc",
        log.epochs.iter().map(|e| e.validation.macro_auc).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

#[pymodule]
fn mlbatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PySelector>()?;
    m.add_function(wrap_pyfunction!(kfold, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(selection_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(rank_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add("STRATEGIES", Strategy::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    Ok(())
}
