//! Multi-label evaluation metrics.
//!
//! Score-based metrics take an n×q matrix of real scores; thresholded
//! metrics predict a label positive when its score is at least the
//! threshold. Ties in ranking-based metrics count one half.

mod wilcoxon;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use wilcoxon::{
    wilcoxon_exact_p, wilcoxon_normal_p, wilcoxon_signed_rank, wilcoxon_signed_rank_with,
    WilcoxonMethod, WilcoxonResult, EXACT_LIMIT,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    MacroF,
    MicroF,
    MacroAuc,
    RankingLoss,
    HammingLoss,
    OneError,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::MacroF,
        MetricKind::MicroF,
        MetricKind::MacroAuc,
        MetricKind::RankingLoss,
        MetricKind::HammingLoss,
        MetricKind::OneError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::MacroF => "macro_f",
            MetricKind::MicroF => "micro_f",
            MetricKind::MacroAuc => "macro_auc",
            MetricKind::RankingLoss => "ranking_loss",
            MetricKind::HammingLoss => "hamming_loss",
            MetricKind::OneError => "one_error",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::MacroF | MetricKind::MicroF | MetricKind::MacroAuc)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Argument(format!("unknown metric '{s}'")))
    }
}

/// All six metrics for one score matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub macro_f: f64,
    pub micro_f: f64,
    /// NaN when no label has both positive and negative instances.
    pub macro_auc: f64,
    pub ranking_loss: f64,
    pub hamming_loss: f64,
    pub one_error: f64,
}

impl MetricReport {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::MacroF => self.macro_f,
            MetricKind::MicroF => self.micro_f,
            MetricKind::MacroAuc => self.macro_auc,
            MetricKind::RankingLoss => self.ranking_loss,
            MetricKind::HammingLoss => self.hamming_loss,
            MetricKind::OneError => self.one_error,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        MetricKind::ALL.map(|k| self.get(k))
    }
}

fn check_shapes<T>(scores: &Array2<T>, labels: &Array2<u8>) -> Result<()> {
    if scores.dim() != labels.dim() {
        return Err(Error::Argument(format!(
            "score matrix is {:?} but label matrix is {:?}",
            scores.dim(),
            labels.dim()
        )));
    }
    Ok(())
}

fn check_scores(scores: &Array2<f64>) -> Result<()> {
    if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("score {v} is not finite")));
    }
    Ok(())
}

/// Thresholded predictions (`score >= threshold`).
pub fn predict(scores: &Array2<f64>, threshold: f64) -> Array2<u8> {
    scores.mapv(|s| u8::from(s >= threshold))
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// (tp, fp, fn) per label.
fn confusion(pred: &Array2<u8>, labels: &Array2<u8>) -> Vec<(usize, usize, usize)> {
    let q = labels.ncols();
    let mut counts = vec![(0, 0, 0); q];
    for (p_row, y_row) in pred.rows().into_iter().zip(labels.rows()) {
        for (j, (&p, &y)) in p_row.iter().zip(y_row.iter()).enumerate() {
            match (p, y) {
                (1, 1) => counts[j].0 += 1,
                (1, 0) => counts[j].1 += 1,
                (0, 1) => counts[j].2 += 1,
                _ => {}
            }
        }
    }
    counts
}

/// Mean per-label F1. A label with no true and no predicted positives
/// scores 1.
pub fn macro_f(scores: &Array2<f64>, labels: &Array2<u8>, threshold: f64) -> Result<f64> {
    check_shapes(scores, labels)?;
    check_scores(scores)?;
    let counts = confusion(&predict(scores, threshold), labels);
    Ok(counts.iter().map(|&(tp, fp, fn_)| f1(tp, fp, fn_)).sum::<f64>() / counts.len() as f64)
}

/// F1 of the pooled confusion counts.
pub fn micro_f(scores: &Array2<f64>, labels: &Array2<u8>, threshold: f64) -> Result<f64> {
    check_shapes(scores, labels)?;
    check_scores(scores)?;
    let (tp, fp, fn_) = confusion(&predict(scores, threshold), labels)
        .into_iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(f1(tp, fp, fn_))
}

/// Mann–Whitney AUC of one column; `None` without both classes.
fn column_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + end) as f64 / 2.0 + 1.0;
        let pos_in_group = order[start..=end].iter().filter(|&&i| labels[i] == 1).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        start = end + 1;
    }
    let (p, m) = (n_pos as f64, n_neg as f64);
    Some((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * m))
}

/// Mean per-label ROC-AUC over labels with both classes present.
pub fn macro_auc(scores: &Array2<f64>, labels: &Array2<u8>) -> Result<f64> {
    check_shapes(scores, labels)?;
    check_scores(scores)?;
    let aucs: Vec<f64> = (0..labels.ncols())
        .filter_map(|j| {
            let s = scores.column(j).to_vec();
            let y = labels.column(j).to_vec();
            column_auc(&s, &y)
        })
        .collect();
    if aucs.is_empty() {
        return Err(Error::Degenerate(
            "no label has both positive and negative instances".into(),
        ));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Mean fraction of misordered (relevant, irrelevant) label pairs over
/// instances having both. Returns 0 when no instance qualifies.
pub fn ranking_loss(scores: &Array2<f64>, labels: &Array2<u8>) -> Result<f64> {
    check_shapes(scores, labels)?;
    check_scores(scores)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (s, y) in scores.rows().into_iter().zip(labels.rows()) {
        let pos: Vec<f64> = s.iter().zip(y.iter()).filter(|(_, &v)| v == 1).map(|(&x, _)| x).collect();
        let neg: Vec<f64> = s.iter().zip(y.iter()).filter(|(_, &v)| v == 0).map(|(&x, _)| x).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut bad = 0.0;
        for &p in &pos {
            for &m in &neg {
                if p < m {
                    bad += 1.0;
                } else if p == m {
                    bad += 0.5;
                }
            }
        }
        total += bad / (pos.len() * neg.len()) as f64;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

/// Fraction of disagreeing entries.
pub fn hamming_loss(predictions: &Array2<u8>, labels: &Array2<u8>) -> Result<f64> {
    check_shapes(predictions, labels)?;
    let wrong = predictions.iter().zip(labels.iter()).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / labels.len() as f64)
}

/// Fraction of instances whose top-scored label (lowest index on ties) is
/// irrelevant, over instances with at least one relevant label. Returns 0
/// when no instance qualifies.
pub fn one_error(scores: &Array2<f64>, labels: &Array2<u8>) -> Result<f64> {
    check_shapes(scores, labels)?;
    check_scores(scores)?;
    let mut wrong = 0usize;
    let mut counted = 0usize;
    for (s, y) in scores.rows().into_iter().zip(labels.rows()) {
        if !y.iter().any(|&v| v == 1) {
            continue;
        }
        let mut top = 0;
        for (j, &v) in s.iter().enumerate() {
            if v > s[top] {
                top = j;
            }
        }
        counted += 1;
        if y[top] == 0 {
            wrong += 1;
        }
    }
    Ok(if counted == 0 { 0.0 } else { wrong as f64 / counted as f64 })
}

/// All six metrics. Macro-AUC is NaN instead of an error when undefined.
pub fn evaluate(scores: &Array2<f64>, labels: &Array2<u8>, threshold: f64) -> Result<MetricReport> {
    check_shapes(scores, labels)?;
    check_scores(scores)?;
    let macro_auc = match macro_auc(scores, labels) {
        Ok(v) => v,
        Err(Error::Degenerate(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        macro_f: macro_f(scores, labels, threshold)?,
        micro_f: micro_f(scores, labels, threshold)?,
        macro_auc,
        ranking_loss: ranking_loss(scores, labels)?,
        hamming_loss: hamming_loss(&predict(scores, threshold), labels)?,
        one_error: one_error(scores, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn as_scores(y: &Array2<u8>) -> Array2<f64> {
        y.mapv(f64::from)
    }

    #[test]
    fn perfect_predictions() {
        let y = array![[1, 0], [0, 1], [1, 1]];
        let s = as_scores(&y);
        let r = evaluate(&s, &y, 0.5).unwrap();
        assert_eq!(r.macro_f, 1.0);
        assert_eq!(r.micro_f, 1.0);
        assert_eq!(r.macro_auc, 1.0);
        assert_eq!(r.ranking_loss, 0.0);
        assert_eq!(r.hamming_loss, 0.0);
        assert_eq!(r.one_error, 0.0);
    }

    #[test]
    fn below_threshold_all_positive() {
        let y = Array2::<u8>::ones((3, 2));
        let s = Array2::from_elem((3, 2), 0.1);
        assert_eq!(macro_f(&s, &y, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn f_hand_case() {
        // label 0: tp 1, fp 1, fn 1 -> 0.5; label 1: tp 2, fp 0, fn 0 -> 1
        let y = array![[1, 1], [1, 0], [0, 1], [0, 0]];
        let s = array![[0.9, 0.8], [0.2, 0.1], [0.1, 0.7], [0.6, 0.3]];
        assert!((macro_f(&s, &y, 0.5).unwrap() - 0.75).abs() < 1e-15);
        // pooled: tp 3, fp 1, fn 1 -> 6/8
        assert!((micro_f(&s, &y, 0.5).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_label_micro_equals_macro() {
        let y = array![[1], [0], [1], [1]];
        let s = array![[0.7], [0.6], [0.2], [0.9]];
        assert_eq!(macro_f(&s, &y, 0.5).unwrap(), micro_f(&s, &y, 0.5).unwrap());
    }

    #[test]
    fn auc_constant_and_pairs() {
        let y = array![[1], [0], [1], [0], [0]];
        assert_eq!(macro_auc(&Array2::from_elem((5, 1), 0.3), &y).unwrap(), 0.5);
        let s = array![[0.8], [0.3], [0.3], [0.9], [0.1]];
        // pairs (pos, neg): (0.8: .3 .9 .1 -> 2), (0.3: .3 tie, .9, .1 -> 1.5) => 3.5/6
        assert!((macro_auc(&s, &y).unwrap() - 3.5 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn auc_degenerate() {
        let y = array![[1], [1]];
        assert!(matches!(macro_auc(&array![[0.1], [0.2]], &y), Err(Error::Degenerate(_))));
        assert!(evaluate(&array![[0.1], [0.2]], &y, 0.5).unwrap().macro_auc.is_nan());
    }

    #[test]
    fn ranking_loss_cases() {
        let y = array![[1, 0, 1], [0, 1, 0], [1, 1, 0]];
        let inverted = as_scores(&y).mapv(|v| 1.0 - v);
        assert_eq!(ranking_loss(&inverted, &y).unwrap(), 1.0);
        // row 0: pos {0.5, 0.5} neg {0.5} -> two ties -> 0.5
        // row 1: pos {0.9} neg {0.1, 0.95} -> 1/2
        // row 2: pos {0.2, 0.4} neg {0.3} -> 1/2
        let s = array![[0.5, 0.5, 0.5], [0.1, 0.9, 0.95], [0.2, 0.4, 0.3]];
        assert!((ranking_loss(&s, &y).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hamming_cases() {
        let y = array![[1, 0], [0, 1]];
        assert_eq!(hamming_loss(&array![[1, 1], [0, 1]], &y).unwrap(), 0.25);
        assert_eq!(hamming_loss(&y.mapv(|v| 1 - v), &y).unwrap(), 1.0);
    }

    #[test]
    fn one_error_cases() {
        let y = array![[1, 0, 0], [0, 1, 0], [0, 0, 0], [0, 1, 1]];
        // tops: 0 (ok), 0 (wrong), skipped, tie 1/2 -> 1 (ok)
        let s = array![[0.9, 0.1, 0.2], [0.8, 0.5, 0.1], [0.1, 0.1, 0.1], [0.2, 0.7, 0.7]];
        assert!((one_error(&s, &y).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let never = array![[0.1, 0.9, 0.0]];
        assert_eq!(one_error(&never, &array![[1, 0, 0]]).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(macro_f(&Array2::zeros((2, 2)), &Array2::zeros((2, 3)), 0.5).is_err());
    }

    #[test]
    fn metric_names() {
        for k in MetricKind::ALL {
            assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
        }
        assert_eq!("Macro-AUC".parse::<MetricKind>().unwrap(), MetricKind::MacroAuc);
    }

    fn instance() -> impl Strategy<Value = (Array2<f64>, Array2<u8>)> {
        (2usize..10, 1usize..5).prop_flat_map(|(n, q)| {
            (
                proptest::collection::vec(0u8..5, n * q),
                proptest::collection::vec(0u8..2, n * q),
            )
                .prop_map(move |(s, y)| {
                    (
                        Array2::from_shape_vec((n, q), s.into_iter().map(|v| v as f64 / 4.0).collect()).unwrap(),
                        Array2::from_shape_vec((n, q), y).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn auc_monotone_invariant((s, y) in instance()) {
            if let Ok(a) = macro_auc(&s, &y) {
                let t = s.mapv(|v| (3.0 * v).exp() - 7.0);
                prop_assert!((macro_auc(&t, &y).unwrap() - a).abs() < 1e-12);
            }
        }

        #[test]
        fn ranking_loss_inverts((s, y) in instance()) {
            // make scores tie-free within rows
            let s = Array2::from_shape_fn(s.dim(), |(i, j)| s[[i, j]] + j as f64 * 1e-3);
            let v = ranking_loss(&s, &y).unwrap();
            let w = ranking_loss(&s.mapv(|x| -x), &y).unwrap();
            let countable = y.rows().into_iter().any(|r| r.iter().any(|&v| v == 1) && r.iter().any(|&v| v == 0));
            if countable {
                prop_assert!((v + w - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn hamming_symmetric((s, y) in instance()) {
            let p = predict(&s, 0.5);
            prop_assert_eq!(hamming_loss(&p, &y).unwrap(), hamming_loss(&y, &p).unwrap());
        }

        #[test]
        fn metrics_in_unit_interval((s, y) in instance()) {
            let r = evaluate(&s, &y, 0.5).unwrap();
            for v in r.values() {
                prop_assert!(v.is_nan() || (0.0..=1.0).contains(&v));
            }
        }
    }
}
