//! Weighted batch drawing.
//!
//! Every single draw uses the same inverse-CDF step: take the candidates in
//! ascending index order, scale one uniform variate by their total mass and
//! return the first candidate whose running sum exceeds it.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::imbalance::{top_related_labels, LabelAdjacency};

/// One draw from `probabilities` restricted to candidates where
/// `eligible[i]` is true. Returns `None`, without consuming a variate, when
/// no candidate is eligible.
pub fn draw_one<R: Rng + ?Sized>(
    probabilities: &[f64],
    eligible: &[bool],
    rng: &mut R,
) -> Option<usize> {
    if !eligible.iter().any(|&e| e) {
        return None;
    }
    let total: f64 = probabilities
        .iter()
        .zip(eligible)
        .filter(|(_, &e)| e)
        .map(|(p, _)| p)
        .sum();
    let mut last = None;
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, (&p, &e)) in probabilities.iter().zip(eligible).enumerate() {
        if !e {
            continue;
        }
        acc += p;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}

/// `batch_size` distinct indices, drawn one at a time with the
/// distribution renormalized over the samples not yet chosen.
pub fn draw_batch<R: Rng + ?Sized>(
    probabilities: &[f64],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = probabilities.len();
    if batch_size > n {
        return Err(Error::Argument(format!(
            "batch size {batch_size} exceeds {n} samples"
        )));
    }
    let mut available = vec![true; n];
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let i = draw_one(probabilities, &available, rng).expect("pool not exhausted");
        available[i] = false;
        batch.push(i);
    }
    Ok(batch)
}

/// Label structure needed by chained selection.
#[derive(Debug, Clone)]
pub struct ChainContext {
    labels: Array2<u8>,
    irlbl: Vec<f64>,
    adjacency: LabelAdjacency,
    related_count: usize,
    members: Vec<Vec<usize>>,
}

impl ChainContext {
    /// `card` is the training set's label cardinality; `ceil(card)` related
    /// labels are used, clamped to `[1, q - 1]`.
    pub fn new(
        labels: Array2<u8>,
        irlbl: Vec<f64>,
        adjacency: LabelAdjacency,
        card: f64,
    ) -> Result<Self> {
        let q = labels.ncols();
        if irlbl.len() != q || adjacency.n_labels() != q {
            return Err(Error::Argument(format!(
                "chain context: {q} labels, {} ratios, {}x{0} adjacency",
                irlbl.len(),
                adjacency.n_labels()
            )));
        }
        if !(card.is_finite() && card >= 0.0) {
            return Err(Error::Argument(format!("label cardinality {card} is invalid")));
        }
        let members = labels
            .columns()
            .into_iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .filter_map(|(i, &v)| (v == 1).then_some(i))
                    .collect()
            })
            .collect();
        let related_count = (card.ceil() as usize).clamp(1, q.saturating_sub(1).max(1));
        Ok(Self {
            labels,
            irlbl,
            adjacency,
            related_count,
            members,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.labels.nrows()
    }

    pub fn related_count(&self) -> usize {
        self.related_count
    }

    /// The sample's positive label with the largest imbalance ratio (lowest
    /// index on ties), or `None` for a sample without positive labels.
    pub fn anchor_label(&self, sample: usize) -> Option<usize> {
        let row = self.labels.row(sample);
        let mut best: Option<usize> = None;
        for (j, &v) in row.iter().enumerate() {
            if v == 1 && best.is_none_or(|b| self.irlbl[j] > self.irlbl[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Labels most associated with the sample's anchor label.
    pub fn related_labels(&self, sample: usize) -> Vec<usize> {
        if self.labels.ncols() < 2 {
            return Vec::new();
        }
        match self.anchor_label(sample) {
            Some(anchor) => top_related_labels(&self.adjacency, anchor, self.related_count)
                .expect("count clamped to valid range"),
            None => Vec::new(),
        }
    }

    /// Membership mask of instances positive for at least one related label.
    pub fn related_instances(&self, sample: usize) -> Vec<bool> {
        let mut mask = vec![false; self.n_instances()];
        for l in self.related_labels(sample) {
            for &i in &self.members[l] {
                mask[i] = true;
            }
        }
        mask
    }
}

/// Chained batch: the first sample is drawn from the full distribution;
/// each later sample is drawn from the instances related to the previous
/// pick's anchor label, falling back to the full distribution when that
/// pool is empty or the previous pick has no positive labels.
pub fn draw_chain_batch<R: Rng + ?Sized>(
    probabilities: &[f64],
    chain: &ChainContext,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = probabilities.len();
    if chain.n_instances() != n {
        return Err(Error::Argument(format!(
            "chain context covers {} instances, distribution has {n}",
            chain.n_instances()
        )));
    }
    if batch_size > n {
        return Err(Error::Argument(format!(
            "batch size {batch_size} exceeds {n} samples"
        )));
    }
    let mut available = vec![true; n];
    let mut batch = Vec::with_capacity(batch_size);
    if batch_size == 0 {
        return Ok(batch);
    }
    let mut seed = draw_one(probabilities, &available, rng).expect("non-empty");
    available[seed] = false;
    batch.push(seed);
    while batch.len() < batch_size {
        let mut pool = chain.related_instances(seed);
        for (p, &a) in pool.iter_mut().zip(&available) {
            *p &= a;
        }
        let next = match draw_one(probabilities, &pool, rng) {
            Some(i) => i,
            None => draw_one(probabilities, &available, rng).expect("pool not exhausted"),
        };
        available[next] = false;
        batch.push(next);
        seed = next;
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imbalance::{irlbl, label_adjacency};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_batch_is_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = vec![0.1, 0.2, 0.3, 0.4];
        let mut b = draw_batch(&p, 4, &mut rng).unwrap();
        b.sort_unstable();
        assert_eq!(b, vec![0, 1, 2, 3]);
    }

    #[test]
    fn oversized_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(draw_batch(&[0.5, 0.5], 3, &mut rng).is_err());
    }

    #[test]
    fn two_point_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| draw_batch(&[0.2, 0.8], 1, &mut rng).unwrap()[0] == 1)
            .count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.8).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn uniform_inclusion_within_three_sigma() {
        // n = 10, batch 3: each index is included with probability 3/10.
        let (n, b, trials) = (10, 3, 100_000);
        let p = vec![0.1; n];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = vec![0usize; n];
        for _ in 0..trials {
            for i in draw_batch(&p, b, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let pi = b as f64 / n as f64;
        let sigma = (trials as f64 * pi * (1.0 - pi)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * pi).abs() < 3.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let p = vec![0.05, 0.15, 0.3, 0.5];
        let a = draw_batch(&p, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = draw_batch(&p, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    fn context(labels: Array2<u8>) -> ChainContext {
        let r = irlbl(&labels).unwrap();
        let adj = label_adjacency(&labels);
        let card = crate::data::Dataset::from_arrays(Array2::zeros((labels.nrows(), 1)), labels.clone())
            .unwrap()
            .stats()
            .card;
        ChainContext::new(labels, r, adj, card).unwrap()
    }

    #[test]
    fn vacuous_restriction_covers_everything() {
        let ctx = context(Array2::ones((5, 2)));
        for i in 0..5 {
            assert!(ctx.related_instances(i).iter().all(|&m| m));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = draw_chain_batch(&[0.2; 5], &ctx, 5, &mut rng).unwrap();
        b.sort_unstable();
        assert_eq!(b, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn anchor_is_rarest_positive_label() {
        // label 1 is rarer than label 0
        let ctx = context(array![[1, 1], [1, 0], [1, 0], [0, 0]]);
        assert_eq!(ctx.anchor_label(0), Some(1));
        assert_eq!(ctx.anchor_label(1), Some(0));
        assert_eq!(ctx.anchor_label(3), None);
    }

    #[test]
    fn seed_without_labels_falls_back() {
        let ctx = context(array![[0, 0], [1, 0], [0, 1]]);
        assert!(ctx.related_instances(0).iter().all(|&m| !m));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = draw_chain_batch(&[1.0 / 3.0; 3], &ctx, 3, &mut rng).unwrap();
        let mut sorted = b.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }
}
