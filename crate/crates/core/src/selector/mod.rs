//! Mini-batch selection strategies.
//!
//! [`BatchSelector`] owns the per-sample loss state, a seeded generator and
//! the epoch schedule. Warm-up batches are slices of a fresh uniform
//! permutation per epoch, which is also what the `random` strategy does for
//! the whole run, so every strategy produces the same warm-up batches for the
//! same seed.

mod draw;
mod probability;
mod state;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use draw::{draw_batch, draw_chain_batch, draw_one, ChainContext};
pub use probability::{
    exponential_probabilities, loss_ranks, quantize, rank_probabilities, selection_probabilities,
};
pub use state::{epoch_batch_sizes, ProbabilityRule, SelectionState};

/// Default selection pressure.
pub const DEFAULT_PRESSURE: f64 = 8.0;
/// Pressures offered for sweeps.
pub const PRESSURE_CHOICES: [f64; 4] = [2.0, 8.0, 16.0, 64.0];
/// Default number of warm-up epochs.
pub const DEFAULT_WARMUP: usize = 3;

/// Stream id reserved for batch selection, kept apart from model init.
const SELECTOR_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Random,
    Hard,
    Adaptive,
    AdaptiveChain,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Random,
        Strategy::Hard,
        Strategy::Adaptive,
        Strategy::AdaptiveChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Hard => "hard",
            Strategy::Adaptive => "adaptive",
            Strategy::AdaptiveChain => "adaptive-chain",
        }
    }

    pub fn rule(self) -> ProbabilityRule {
        match self {
            Strategy::Random => ProbabilityRule::Uniform,
            Strategy::Hard => ProbabilityRule::Ranked,
            Strategy::Adaptive | Strategy::AdaptiveChain => ProbabilityRule::Quantized,
        }
    }

    /// Whether instance weights enter the selection loss.
    pub fn uses_weights(self) -> bool {
        matches!(self, Strategy::Adaptive | Strategy::AdaptiveChain)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "hard" => Ok(Strategy::Hard),
            "adaptive" => Ok(Strategy::Adaptive),
            "adaptive-chain" | "adaptive_chain" => Ok(Strategy::AdaptiveChain),
            other => Err(Error::Argument(format!(
                "unknown strategy '{other}' (expected random, hard, adaptive or adaptive-chain)"
            ))),
        }
    }
}

/// Selector settings shared by all strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorConfig {
    pub batch_size: usize,
    pub pressure: f64,
    pub warmup_epochs: usize,
    pub seed: u64,
}

/// Where a batch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchOrigin {
    /// Slice of the epoch's uniform permutation (warm-up or `random`).
    Permutation,
    /// Weighted draw from the selection distribution.
    Weighted,
    /// Chained weighted draw.
    Chain,
}

/// A selected batch with its position in the epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    /// Selection probability of each index at the time of the draw.
    pub probabilities: Vec<f64>,
    pub batch_in_epoch: usize,
    pub origin: BatchOrigin,
}

#[derive(Debug, Clone)]
pub struct BatchSelector {
    strategy: Strategy,
    state: SelectionState,
    rng: ChaCha8Rng,
    chain: Option<ChainContext>,
    batch_sizes: Vec<usize>,
    permutation: Vec<usize>,
    position: usize,
}

impl BatchSelector {
    /// `weights` are the instance weights; they are replaced by ones for the
    /// strategies that ignore them. `chain` is required for `adaptive-chain`.
    pub fn new(
        strategy: Strategy,
        n: usize,
        config: SelectorConfig,
        weights: Vec<f64>,
        chain: Option<ChainContext>,
    ) -> Result<Self> {
        let state =
            SelectionState::new(n, config.pressure, config.warmup_epochs, config.batch_size, weights)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SELECTOR_STREAM);
        let mut selector = Self {
            strategy,
            state,
            rng,
            chain: None,
            batch_sizes: epoch_batch_sizes(n, config.batch_size),
            permutation: (0..n).collect(),
            position: 0,
        };
        let weights = selector.state.weights().to_vec();
        selector.switch_strategy(strategy, weights, chain)?;
        Ok(selector)
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn state(&self) -> &SelectionState {
        &self.state
    }

    pub fn chain(&self) -> Option<&ChainContext> {
        self.chain.as_ref()
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.batch_sizes.len()
    }

    pub fn batch_sizes(&self) -> &[usize] {
        &self.batch_sizes
    }

    /// Index of the next batch within its epoch.
    pub fn position(&self) -> usize {
        self.position
    }

    pub fn in_warmup(&self) -> bool {
        self.state.in_warmup()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Changes strategy while keeping stored losses, the generator and the
    /// epoch position. Used to branch several strategies off one warm-up.
    pub fn switch_strategy(
        &mut self,
        strategy: Strategy,
        weights: Vec<f64>,
        chain: Option<ChainContext>,
    ) -> Result<()> {
        let n = self.state.len();
        if strategy == Strategy::AdaptiveChain {
            match &chain {
                None => {
                    return Err(Error::Argument(
                        "adaptive-chain selection needs label context".into(),
                    ))
                }
                Some(c) if c.n_instances() != n => {
                    return Err(Error::Argument(format!(
                        "chain context covers {} instances, selector has {n}",
                        c.n_instances()
                    )))
                }
                Some(_) => {}
            }
        }
        let weights = if strategy.uses_weights() {
            weights
        } else {
            vec![1.0; n]
        };
        self.state.reconfigure(strategy.rule(), weights)?;
        self.strategy = strategy;
        self.chain = chain;
        Ok(())
    }

    /// Ends warm-up early; later batches follow the strategy.
    pub fn skip_warmup(&mut self) {
        self.state.end_warmup();
    }

    /// Produces the next batch of the schedule.
    pub fn next_batch(&mut self) -> Result<Batch> {
        let pos = self.position;
        let size = self.batch_sizes[pos];
        let probabilities_before = self.state.probabilities().to_vec();
        let permuted = self.state.in_warmup() || self.strategy == Strategy::Random;
        let (indices, origin) = if permuted {
            if pos == 0 {
                self.permutation.shuffle(&mut self.rng);
            }
            let start: usize = self.batch_sizes[..pos].iter().sum();
            let slice = self.permutation[start..start + size].to_vec();
            (slice, BatchOrigin::Permutation)
        } else if self.strategy == Strategy::AdaptiveChain {
            let chain = self.chain.as_ref().expect("checked on switch");
            (
                draw_chain_batch(&probabilities_before, chain, size, &mut self.rng)?,
                BatchOrigin::Chain,
            )
        } else {
            (
                draw_batch(&probabilities_before, size, &mut self.rng)?,
                BatchOrigin::Weighted,
            )
        };
        if self.state.in_warmup() {
            self.state.consume_warmup_batch();
        }
        self.position = (pos + 1) % self.batch_sizes.len();
        let probabilities = indices.iter().map(|&i| probabilities_before[i]).collect();
        Ok(Batch {
            indices,
            probabilities,
            batch_in_epoch: pos,
            origin,
        })
    }

    /// Stores fresh per-sample losses for a batch and refreshes the
    /// distribution.
    pub fn record_losses(&mut self, indices: &[usize], losses: &[f64]) -> Result<()> {
        self.state.update_after_batch(indices, losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn config(batch_size: usize, warmup: usize) -> SelectorConfig {
        SelectorConfig {
            batch_size,
            pressure: 8.0,
            warmup_epochs: warmup,
            seed: 11,
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("greedy".parse::<Strategy>().is_err());
    }

    #[test]
    fn random_epochs_are_permutations() {
        let mut sel = BatchSelector::new(Strategy::Random, 10, config(4, 0), vec![1.0; 10], None).unwrap();
        for _ in 0..3 {
            let mut seen = Vec::new();
            for _ in 0..sel.batches_per_epoch() {
                seen.extend(sel.next_batch().unwrap().indices);
            }
            seen.sort_unstable();
            assert_eq!(seen, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn warmup_identical_across_strategies() {
        let labels = Array2::from_shape_fn((12, 2), |(i, j)| ((i + j) % 3 == 0) as u8);
        let chain = ChainContext::new(
            labels.clone(),
            crate::imbalance::irlbl(&labels).unwrap(),
            crate::imbalance::label_adjacency(&labels),
            1.0,
        )
        .unwrap();
        let mut runs = Vec::new();
        for s in Strategy::ALL {
            let mut sel = BatchSelector::new(s, 12, config(5, 2), vec![1.5; 12], Some(chain.clone())).unwrap();
            let batches: Vec<Vec<usize>> = (0..6)
                .map(|_| {
                    let b = sel.next_batch().unwrap();
                    let losses: Vec<f64> = b.indices.iter().map(|&i| i as f64 * 0.1).collect();
                    sel.record_losses(&b.indices, &losses).unwrap();
                    b.indices
                })
                .collect();
            assert!(!sel.in_warmup());
            runs.push(batches);
        }
        assert!(runs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn chain_requires_context() {
        assert!(BatchSelector::new(Strategy::AdaptiveChain, 4, config(2, 0), vec![1.0; 4], None).is_err());
    }

    #[test]
    fn hard_ignores_weights() {
        let sel = BatchSelector::new(Strategy::Hard, 3, config(1, 0), vec![2.0, 3.0, 4.0], None).unwrap();
        assert_eq!(sel.state().weights(), &[1.0; 3]);
        assert_eq!(sel.state().rule(), ProbabilityRule::Ranked);
    }

    #[test]
    fn weighted_batches_have_requested_sizes() {
        let mut sel = BatchSelector::new(Strategy::Adaptive, 7, config(3, 0), vec![1.0; 7], None).unwrap();
        let sizes: Vec<usize> = (0..3).map(|_| sel.next_batch().unwrap().indices.len()).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        let b = sel.next_batch().unwrap();
        assert_eq!(b.batch_in_epoch, 0);
        assert_eq!(b.origin, BatchOrigin::Weighted);
    }

    #[test]
    fn switch_keeps_losses() {
        let mut sel = BatchSelector::new(Strategy::Random, 3, config(3, 1), vec![1.0; 3], None).unwrap();
        let b = sel.next_batch().unwrap();
        sel.record_losses(&b.indices, &[0.5, 0.25, 1.0]).unwrap();
        let raw = sel.state().raw_loss().to_vec();
        sel.switch_strategy(Strategy::Adaptive, vec![2.0, 1.0, 1.0], None).unwrap();
        assert_eq!(sel.state().raw_loss(), raw.as_slice());
        assert_eq!(sel.state().weighted_loss()[0], 2.0 * raw[0]);
    }
}
