//! Multi-label datasets: an `n × d` real feature matrix paired with an
//! `n × q` binary label matrix.

mod arff;
mod csv_io;
mod split;

use std::collections::HashSet;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

pub use arff::{load_arff, parse_arff, parse_label_list, read_label_list, LabelSpec};
pub use csv_io::{load_csv, parse_csv, write_csv};
pub use split::{kfold, FoldSplit, Split};

/// Immutable multi-label dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array2<u8>,
    feature_names: Vec<String>,
    label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking every shape and value invariant.
    pub fn new(
        features: Array2<f64>,
        labels: Array2<u8>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        let (n_labels_rows, q) = labels.dim();
        if n == 0 {
            return Err(Error::Validation("dataset has no instances".into()));
        }
        if d == 0 {
            return Err(Error::Validation("dataset has no feature columns".into()));
        }
        if q == 0 {
            return Err(Error::Validation("dataset has no label columns".into()));
        }
        if n_labels_rows != n {
            return Err(Error::Validation(format!(
                "feature matrix has {n} rows but label matrix has {n_labels_rows}"
            )));
        }
        if feature_names.len() != d {
            return Err(Error::Validation(format!(
                "{} feature names for {d} feature columns",
                feature_names.len()
            )));
        }
        if label_names.len() != q {
            return Err(Error::Validation(format!(
                "{} label names for {q} label columns",
                label_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(q);
        for name in &label_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("label `{name}` declared twice")));
            }
        }
        if let Some(((i, j), v)) = labels.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(Error::Validation(format!(
                "label entry ({i}, {j}) is {v}, expected 0 or 1"
            )));
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "feature entry ({i}, {j}) is not finite"
            )));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            label_names,
        })
    }

    /// Convenience constructor with generated names `f0..`, `l0..`.
    pub fn from_arrays(features: Array2<f64>, labels: Array2<u8>) -> Result<Self> {
        let feature_names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        let label_names = (0..labels.ncols()).map(|j| format!("l{j}")).collect();
        Self::new(features, labels, feature_names, label_names)
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_instances()) {
            return Err(Error::Argument(format!(
                "row index {bad} out of range for {} instances",
                self.n_instances()
            )));
        }
        Dataset::new(
            self.features.select(Axis(0), indices),
            self.labels.select(Axis(0), indices),
            self.feature_names.clone(),
            self.label_names.clone(),
        )
    }

    pub fn stats(&self) -> DatasetStats {
        stats(self)
    }
}

/// Label cardinality and density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    /// Mean number of positive labels per instance.
    pub card: f64,
    /// `card / q`.
    pub dens: f64,
}

pub fn stats(dataset: &Dataset) -> DatasetStats {
    let labels = dataset.labels();
    let positives: u64 = labels.iter().map(|&v| u64::from(v)).sum();
    let card = positives as f64 / dataset.n_instances() as f64;
    DatasetStats {
        card,
        dens: card / dataset.n_labels() as f64,
    }
}

/// Per-column z-scoring fitted on a subset of rows. Constant columns are
/// centred but left unscaled.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(features: &Array2<f64>, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Argument("cannot standardize on zero rows".into()));
        }
        let sub = features.select(Axis(0), rows);
        let mean = sub.mean_axis(Axis(0)).expect("non-empty");
        let var = sub.var_axis(Axis(0), 0.0);
        let scale = var.mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, features: &Array2<f64>) -> Array2<f64> {
        (features - &self.mean) / &self.scale
    }
}
