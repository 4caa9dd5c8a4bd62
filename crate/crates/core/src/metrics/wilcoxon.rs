use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences handled by the exact null
/// distribution.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact up to [`EXACT_LIMIT`] non-zero pairs, normal beyond.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Rank sum of positive differences `a - b`.
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_nonzero: usize,
}

/// Tie-averaged ranks of `|d|` for the non-zero differences, plus the signs.
fn signed_ranks(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<bool>)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Argument(format!(
            "paired samples need equal non-zero lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::Argument(format!("difference {d} is not finite")));
    }
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks = vec![0.0; diffs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && diffs[order[end + 1]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = avg;
        }
        start = end + 1;
    }
    Ok((ranks, diffs.iter().map(|&d| d > 0.0).collect()))
}

/// Exact two-sided p-value of `w_plus` given the (tie-averaged) ranks.
/// Ranks are doubled so half-integer averages become integers.
pub fn wilcoxon_exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    // counts[s]: sign patterns whose doubled positive rank sum is s
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let observed = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=observed].iter().sum::<f64>() / total;
    let upper: f64 = counts[observed..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Normal approximation with continuity and tie corrections.
pub fn wilcoxon_normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start;
        while end + 1 < sorted.len() && sorted[end + 1] == sorted[start] {
            end += 1;
        }
        let t = (end - start + 1) as f64;
        tie_term += t * t * t - t;
        start = end + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: WilcoxonMethod) -> Result<WilcoxonResult> {
    let (ranks, positive) = signed_ranks(a, b)?;
    let n_nonzero = ranks.len();
    if n_nonzero == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            w_plus: 0.0,
            w_minus: 0.0,
            n_nonzero,
        });
    }
    let w_plus: f64 = ranks.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let w_minus: f64 = ranks.iter().sum::<f64>() - w_plus;
    let exact = match method {
        WilcoxonMethod::Auto => n_nonzero <= EXACT_LIMIT,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p_value = if exact {
        wilcoxon_exact_p(&ranks, w_plus)
    } else {
        wilcoxon_normal_p(&ranks, w_plus)
    };
    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        p_value,
        w_plus,
        w_minus,
        n_nonzero,
    })
}
