//! Global and local label imbalance.
//!
//! Global imbalance is the per-label ratio `IRLbl_j = max_count / count_j`;
//! labels whose ratio exceeds the mean ratio are minority labels. Local
//! imbalance `B` measures, for each positive (instance, label) pair, the
//! share of the instance's k nearest neighbours that disagree on that label.
//! `B` is column-normalized into `S` (pairs with `B = 1` are treated as
//! outliers and marked `-1`), and summing an instance's minority-label `S`
//! entries gives `epsilon`; the selection weight is `1 + epsilon`.

mod adjacency;
mod knn;

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use adjacency::{label_adjacency, top_related_labels, LabelAdjacency};
pub use knn::nearest_neighbors;

/// `S` entry for pairs whose neighbourhood disagrees completely.
pub const OUTLIER: f64 = -1.0;

/// Neighbour count used when none is given.
pub const DEFAULT_K: usize = 5;

pub fn positive_counts(labels: &Array2<u8>) -> Vec<usize> {
    labels
        .columns()
        .into_iter()
        .map(|c| c.iter().filter(|&&v| v == 1).count())
        .collect()
}

/// Per-label imbalance ratio. Labels without positives map to `+inf`.
pub fn irlbl(labels: &Array2<u8>) -> Result<Vec<f64>> {
    let counts = positive_counts(labels);
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::Degenerate("label matrix has no positive entries".into()));
    }
    Ok(counts
        .iter()
        .map(|&c| if c == 0 { f64::INFINITY } else { max as f64 / c as f64 })
        .collect())
}

/// Mean of the finite ratios; `+inf` entries are left out.
pub fn mean_ir(irlbl: &[f64]) -> Result<f64> {
    let finite: Vec<f64> = irlbl.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Degenerate("no label with a finite imbalance ratio".into()));
    }
    Ok(finite.iter().sum::<f64>() / finite.len() as f64)
}

/// Strictly-greater-than-mean test. `+inf` labels are always minority.
pub fn minority_set(irlbl: &[f64], mean_ir: f64) -> Vec<bool> {
    irlbl.iter().map(|&r| r > mean_ir).collect()
}

/// Local imbalance matrix `B` (n × q).
pub fn local_imbalance(features: &Array2<f64>, labels: &Array2<u8>, k: usize) -> Result<Array2<f64>> {
    if features.nrows() != labels.nrows() {
        return Err(Error::Argument(format!(
            "{} feature rows but {} label rows",
            features.nrows(),
            labels.nrows()
        )));
    }
    let neighbors = nearest_neighbors(features, k)?;
    Ok(local_imbalance_from_neighbors(labels, &neighbors, k))
}

pub(crate) fn local_imbalance_from_neighbors(
    labels: &Array2<u8>,
    neighbors: &[Vec<usize>],
    k: usize,
) -> Array2<f64> {
    let (n, q) = labels.dim();
    let mut b = Array2::<f64>::zeros((n, q));
    for (i, nn) in neighbors.iter().enumerate() {
        for j in 0..q {
            if labels[[i, j]] == 1 {
                let disagree = nn.iter().filter(|&&m| labels[[m, j]] != 1).count();
                b[[i, j]] = disagree as f64 / k as f64;
            }
        }
    }
    b
}

/// Normalized local imbalance, per-instance accumulation and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceScores {
    pub s_matrix: Array2<f64>,
    pub epsilon: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn imbalance_scores(b_matrix: &Array2<f64>, minority_mask: &[bool]) -> Result<ImbalanceScores> {
    let (n, q) = b_matrix.dim();
    if minority_mask.len() != q {
        return Err(Error::Argument(format!(
            "minority mask has {} entries for {q} labels",
            minority_mask.len()
        )));
    }
    if let Some(v) = b_matrix.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Argument(format!("local imbalance entry {v} outside [0, 1]")));
    }
    let mut s = Array2::<f64>::zeros((n, q));
    for j in 0..q {
        let col = b_matrix.column(j);
        let denom: f64 = col.iter().filter(|&&v| v < 1.0).sum();
        for i in 0..n {
            let v = col[i];
            s[[i, j]] = if v >= 1.0 {
                OUTLIER
            } else if denom > 0.0 {
                v / denom
            } else {
                0.0
            };
        }
    }
    let epsilon: Vec<f64> = s
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(minority_mask)
                .filter(|&(&v, &minority)| minority && v != OUTLIER)
                .map(|(&v, _)| v)
                .sum()
        })
        .collect();
    let weights = epsilon.iter().map(|e| 1.0 + e).collect();
    Ok(ImbalanceScores {
        s_matrix: s,
        epsilon,
        weights,
    })
}

/// Every imbalance quantity for one training set.
#[derive(Debug, Clone)]
pub struct ImbalanceProfile {
    pub irlbl: Vec<f64>,
    pub mean_ir: f64,
    pub minority_mask: Vec<bool>,
    pub b_matrix: Array2<f64>,
    pub s_matrix: Array2<f64>,
    pub epsilon: Vec<f64>,
    pub weights: Vec<f64>,
    pub k: usize,
    pub adjacency: LabelAdjacency,
}

impl ImbalanceProfile {
    pub fn build(features: &Array2<f64>, labels: &Array2<u8>, k: usize) -> Result<Self> {
        let irlbl = irlbl(labels)?;
        let mean_ir = mean_ir(&irlbl)?;
        let minority_mask = minority_set(&irlbl, mean_ir);
        let b_matrix = local_imbalance(features, labels, k)?;
        let ImbalanceScores {
            s_matrix,
            epsilon,
            weights,
        } = imbalance_scores(&b_matrix, &minority_mask)?;
        Ok(Self {
            irlbl,
            mean_ir,
            minority_mask,
            b_matrix,
            s_matrix,
            epsilon,
            weights,
            k,
            adjacency: label_adjacency(labels),
        })
    }

    /// Writes `irlbl.csv`, `b_matrix.csv`, `s_matrix.csv`, `weights.csv` and
    /// `adjacency.csv` into `dir`. Matrix columns follow label order.
    pub fn write_debug_csv(&self, dir: impl AsRef<Path>, label_names: &[String]) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = label_names.join(",");

        let mut out = String::from("label,irlbl,minority\n");
        for ((name, r), m) in label_names.iter().zip(&self.irlbl).zip(&self.minority_mask) {
            out.push_str(&format!("{name},{r},{m}\n"));
        }
        write_file(&dir.join("irlbl.csv"), &out)?;
        write_file(&dir.join("b_matrix.csv"), &matrix_csv(&header, &self.b_matrix))?;
        write_file(&dir.join("s_matrix.csv"), &matrix_csv(&header, &self.s_matrix))?;
        write_file(&dir.join("adjacency.csv"), &matrix_csv(&header, self.adjacency.matrix()))?;

        let mut out = String::from("instance,epsilon,weight\n");
        for (i, (e, w)) in self.epsilon.iter().zip(&self.weights).enumerate() {
            out.push_str(&format!("{i},{e},{w}\n"));
        }
        write_file(&dir.join("weights.csv"), &out)
    }
}

fn matrix_csv(header: &str, m: &Array2<f64>) -> String {
    let mut out = format!("{header}\n");
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}
