//! Exact k-nearest-neighbour search by linear scan.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For every row, the indices of its `k` nearest other rows under Euclidean
/// distance, closest first. Equal distances are ordered by ascending index.
pub fn nearest_neighbors(features: &Array2<f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = features.nrows();
    if k == 0 || k >= n {
        return Err(Error::Argument(format!(
            "neighbour count k={k} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let features = features.as_standard_layout();
    let rows: Vec<&[f64]> = features
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));

    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(rows[i], rows[j]), j))
                .collect();
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_distance);
                cand.truncate(k);
            }
            cand.sort_unstable_by(by_distance);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect())
}
