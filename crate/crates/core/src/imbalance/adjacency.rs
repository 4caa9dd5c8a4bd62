use ndarray::Array2;

use crate::error::{Error, Result};

/// Symmetric label co-occurrence strengths with a zero diagonal.
///
/// Entry `(i, j)` averages the two conditional probabilities
/// `P(j | i)` and `P(i | j)` estimated from label counts. A label with no
/// positives contributes zero to both terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAdjacency {
    matrix: Array2<f64>,
}

impl LabelAdjacency {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n_labels(&self) -> usize {
        self.matrix.nrows()
    }

    /// Wraps an existing matrix after checking shape, symmetry and range.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(Error::Argument(format!("adjacency must be square, got {r}x{c}")));
        }
        for i in 0..r {
            if matrix[[i, i]] != 0.0 {
                return Err(Error::Argument(format!("adjacency diagonal ({i},{i}) is non-zero")));
            }
            for j in 0..r {
                let v = matrix[[i, j]];
                if !(0.0..=1.0).contains(&v) || (v - matrix[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Argument(format!(
                        "adjacency entry ({i},{j}) = {v} is out of range or asymmetric"
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }
}

pub fn label_adjacency(labels: &Array2<u8>) -> LabelAdjacency {
    let q = labels.ncols();
    let y = labels.mapv(f64::from);
    let co = y.t().dot(&y);
    let mut matrix = Array2::<f64>::zeros((q, q));
    for i in 0..q {
        for j in 0..q {
            if i == j {
                continue;
            }
            let (ci, cj) = (co[[i, i]], co[[j, j]]);
            let given_i = if ci > 0.0 { co[[i, j]] / ci } else { 0.0 };
            let given_j = if cj > 0.0 { co[[i, j]] / cj } else { 0.0 };
            matrix[[i, j]] = 0.5 * (given_i + given_j);
        }
    }
    LabelAdjacency { matrix }
}

/// The `count` labels most strongly associated with `anchor`, strongest
/// first, ties broken by ascending label index. The anchor is never returned.
pub fn top_related_labels(
    adjacency: &LabelAdjacency,
    anchor: usize,
    count: usize,
) -> Result<Vec<usize>> {
    let q = adjacency.n_labels();
    if anchor >= q {
        return Err(Error::Argument(format!("anchor label {anchor} out of range for {q} labels")));
    }
    if count == 0 || count >= q {
        return Err(Error::Argument(format!(
            "related-label count {count} must lie in [1, {}]",
            q.saturating_sub(1)
        )));
    }
    let row = adjacency.matrix.row(anchor);
    let mut others: Vec<usize> = (0..q).filter(|&j| j != anchor).collect();
    others.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    others.truncate(count);
    Ok(others)
}
