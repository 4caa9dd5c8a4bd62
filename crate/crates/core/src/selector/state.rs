use crate::error::{Error, Result};

use super::probability::{exponential_probabilities, loss_ranks, quantize};

/// How per-sample losses become selection levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbabilityRule {
    /// Uniform probabilities regardless of loss.
    Uniform,
    /// Rank of the raw loss (weights ignored).
    Ranked,
    /// Quantization index of the weighted loss.
    Quantized,
}

/// Per-sample loss bookkeeping and the current selection distribution.
#[derive(Debug, Clone)]
pub struct SelectionState {
    raw_loss: Vec<f64>,
    weights: Vec<f64>,
    weighted_loss: Vec<f64>,
    levels: Vec<usize>,
    probabilities: Vec<f64>,
    pressure: f64,
    rule: ProbabilityRule,
    warmup_remaining: usize,
}

/// Batch sizes making up one epoch: full batches plus a final partial one.
pub fn epoch_batch_sizes(n: usize, batch_size: usize) -> Vec<usize> {
    let full = n / batch_size;
    let mut sizes = vec![batch_size; full];
    if n % batch_size != 0 {
        sizes.push(n % batch_size);
    }
    sizes
}

impl SelectionState {
    /// Uniform initial distribution, zeroed losses and a warm-up budget of
    /// `warmup_epochs` epochs' worth of batches.
    pub fn new(
        n: usize,
        pressure: f64,
        warmup_epochs: usize,
        batch_size: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("selection state needs at least one sample".into()));
        }
        if !(pressure >= 1.0 && pressure.is_finite()) {
            return Err(Error::Argument(format!(
                "selection pressure must be a finite value >= 1, got {pressure}"
            )));
        }
        if batch_size == 0 || batch_size > n {
            return Err(Error::Argument(format!(
                "batch size {batch_size} must lie in [1, {n}]"
            )));
        }
        if weights.len() != n {
            return Err(Error::Argument(format!(
                "{} weights for {n} samples",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Argument(format!("instance weight {w} must be finite and > 0")));
        }
        Ok(Self {
            raw_loss: vec![0.0; n],
            weighted_loss: vec![0.0; n],
            weights,
            levels: vec![0; n],
            probabilities: vec![1.0 / n as f64; n],
            pressure,
            rule: ProbabilityRule::Quantized,
            warmup_remaining: warmup_epochs * epoch_batch_sizes(n, batch_size).len(),
        })
    }

    pub fn with_rule(mut self, rule: ProbabilityRule) -> Self {
        self.rule = rule;
        self.refresh();
        self
    }

    pub fn len(&self) -> usize {
        self.raw_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_loss.is_empty()
    }

    pub fn raw_loss(&self) -> &[f64] {
        &self.raw_loss
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weighted_loss(&self) -> &[f64] {
        &self.weighted_loss
    }

    /// Quantization index (quantized rule) or loss rank (ranked rule).
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn rule(&self) -> ProbabilityRule {
        self.rule
    }

    pub fn warmup_remaining(&self) -> usize {
        self.warmup_remaining
    }

    pub fn in_warmup(&self) -> bool {
        self.warmup_remaining > 0
    }

    pub(crate) fn consume_warmup_batch(&mut self) {
        self.warmup_remaining = self.warmup_remaining.saturating_sub(1);
    }

    pub(crate) fn end_warmup(&mut self) {
        self.warmup_remaining = 0;
    }

    /// Swaps the probability rule and instance weights, keeping the stored
    /// raw losses, then recomputes the distribution.
    pub(crate) fn reconfigure(&mut self, rule: ProbabilityRule, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::Argument(format!(
                "{} weights for {} samples",
                weights.len(),
                self.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Argument(format!("instance weight {w} must be finite and > 0")));
        }
        self.rule = rule;
        self.weights = weights;
        self.refresh();
        Ok(())
    }

    /// Replaces the stored losses of `indices` and recomputes the weighted
    /// losses, levels and probabilities over all samples. Losses of samples
    /// outside the batch are kept as they were.
    pub fn update_after_batch(&mut self, indices: &[usize], losses: &[f64]) -> Result<()> {
        if indices.len() != losses.len() {
            return Err(Error::Argument(format!(
                "{} indices but {} losses",
                indices.len(),
                losses.len()
            )));
        }
        let n = self.len();
        if let Some(&i) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Argument(format!("sample index {i} out of range for {n}")));
        }
        if let Some(l) = losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::Argument(format!("loss {l} must be finite and >= 0")));
        }
        for (&i, &l) in indices.iter().zip(losses) {
            self.raw_loss[i] = l;
        }
        self.refresh();
        Ok(())
    }

    /// Recomputes everything derived from the stored raw losses.
    pub fn refresh(&mut self) {
        for ((wl, &w), &l) in self.weighted_loss.iter_mut().zip(&self.weights).zip(&self.raw_loss) {
            *wl = w * l;
        }
        let n = self.len();
        match self.rule {
            ProbabilityRule::Uniform => {
                self.levels.iter_mut().for_each(|l| *l = 0);
                self.probabilities.iter_mut().for_each(|p| *p = 1.0 / n as f64);
            }
            ProbabilityRule::Ranked => {
                self.levels = loss_ranks(&self.raw_loss);
                self.probabilities = exponential_probabilities(&self.levels, self.pressure);
            }
            ProbabilityRule::Quantized => {
                self.levels = quantize(&self.weighted_loss);
                self.probabilities = exponential_probabilities(&self.levels, self.pressure);
            }
        }
    }

    /// Checks normalization, strict positivity, the positivity lower bound
    /// and level bounds.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("probabilities sum to {total}")));
        }
        if let Some(&l) = self.levels.iter().find(|&&l| l > n) {
            return Err(Error::Validation(format!("level {l} exceeds {n}")));
        }
        let log_base = self.pressure.ln() / n as f64;
        let norm: f64 = self.levels.iter().map(|&l| (l as f64 * log_base).exp()).sum();
        let floor = 1.0 / norm;
        if let Some((i, p)) = self
            .probabilities
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p >= floor * (1.0 - 1e-12)))
        {
            return Err(Error::Validation(format!(
                "probability of sample {i} is {p}, below the positivity floor {floor}"
            )));
        }
        Ok(())
    }
}
