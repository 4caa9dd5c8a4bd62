//! Selection-probability laws.
//!
//! Both laws assign sample `i` a weight `base^level_i` with
//! `base = exp(ln(s_e) / n)`, so the most and least favoured samples differ
//! by at most a factor `s_e`. The rank law uses the loss rank as the level;
//! the quantized law uses `ceil(loss_i / (loss_max / n))`, which ignores loss
//! differences smaller than one quantization step.

/// Quantization index of every loss. All zeros when the maximum loss is 0.
///
/// Computed as `ceil(loss * n / loss_max)` and clamped to `[0, n]`, which is
/// the step-size form rearranged to avoid dividing by a rounded step.
pub fn quantize(weighted_loss: &[f64]) -> Vec<usize> {
    let n = weighted_loss.len();
    let max = weighted_loss.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return vec![0; n];
    }
    weighted_loss
        .iter()
        .map(|&l| {
            let level = (l * n as f64 / max).ceil();
            if level <= 0.0 {
                0
            } else {
                (level as usize).min(n)
            }
        })
        .collect()
}

/// Normalized `base^level` weights.
pub fn exponential_probabilities(levels: &[usize], pressure: f64) -> Vec<f64> {
    let n = levels.len();
    if n == 0 {
        return Vec::new();
    }
    let log_base = pressure.ln() / n as f64;
    let raw: Vec<f64> = levels.iter().map(|&l| (l as f64 * log_base).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Probabilities from quantization indices.
pub fn selection_probabilities(q_index: &[usize], pressure: f64) -> Vec<f64> {
    exponential_probabilities(q_index, pressure)
}

/// 1-based ascending loss ranks; equal losses are ranked by index.
pub fn loss_ranks(loss: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..loss.len()).collect();
    order.sort_by(|&a, &b| loss[a].total_cmp(&loss[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; loss.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Probabilities from loss ranks (higher loss, higher probability).
pub fn rank_probabilities(loss: &[f64], pressure: f64) -> Vec<f64> {
    exponential_probabilities(&loss_ranks(loss), pressure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_example() {
        assert_eq!(quantize(&[0.2, 0.5, 1.0]), vec![1, 2, 3]);
    }

    #[test]
    fn quantize_zero_and_max() {
        let q = quantize(&[0.0, 0.7, 0.35, 0.7]);
        assert_eq!(q[0], 0);
        assert_eq!(q[1], 4);
        assert_eq!(q[3], 4);
        assert_eq!(q[2], 2);
        assert_eq!(quantize(&[0.0, 0.0]), vec![0, 0]);
    }

    #[test]
    fn probabilities_examples() {
        let p = selection_probabilities(&[0, 2], 4.0);
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let p = selection_probabilities(&[3, 3, 3, 3], 64.0);
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let p = selection_probabilities(&[0, 1, 2], 1.0);
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn rank_examples() {
        let p = rank_probabilities(&[0.1, 0.9], 4.0);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rank_probabilities(&[0.3, 0.1, 0.2], 1.0), vec![1.0 / 3.0; 3]);
        assert_eq!(loss_ranks(&[0.5, 0.5, 0.1]), vec![2, 3, 1]);
    }

    proptest! {
        #[test]
        fn quantize_bounded_and_monotone(loss in proptest::collection::vec(0.0f64..10.0, 1..60)) {
            let q = quantize(&loss);
            let n = loss.len();
            prop_assert!(q.iter().all(|&v| v <= n));
            for i in 0..n {
                for j in 0..n {
                    if loss[i] <= loss[j] {
                        prop_assert!(q[i] <= q[j]);
                    }
                }
            }
        }

        #[test]
        fn ratio_law(levels in proptest::collection::vec(0usize..50, 2..50), se in 1.0f64..100.0) {
            let n = levels.len();
            let levels: Vec<usize> = levels.into_iter().map(|l| l.min(n)).collect();
            let p = selection_probabilities(&levels, se);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..n {
                prop_assert!(p[i] > 0.0);
                let expect = se.powf((levels[i] as f64 - levels[0] as f64) / n as f64);
                prop_assert!((p[i] / p[0] - expect).abs() <= 1e-9 * expect.max(1.0));
            }
        }

        #[test]
        fn rank_law_favours_highest_loss(loss in proptest::collection::vec(0.0f64..5.0, 2..40), se in 1.5f64..64.0) {
            let p = rank_probabilities(&loss, se);
            let top = loss_ranks(&loss).iter().position(|&r| r == loss.len()).unwrap();
            prop_assert!(p.iter().all(|&v| v <= p[top]));
        }
    }
}
