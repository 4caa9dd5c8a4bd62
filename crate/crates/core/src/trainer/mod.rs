//! Reference network and training loop.
//!
//! Each step draws a batch from the selector, takes one Adam step on the
//! unweighted batch-mean BCE and hands the batch's per-sample losses back to
//! the selector. Instance weights only ever reach the selector.

mod adam;
mod mlp;

use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Split, Standardizer};
use crate::error::{Error, Result};
use crate::imbalance::{ImbalanceProfile, DEFAULT_K};
use crate::metrics::{evaluate, MetricKind, MetricReport, DEFAULT_THRESHOLD};
use crate::selector::{
    BatchSelector, ChainContext, SelectionState, SelectorConfig, Strategy, DEFAULT_PRESSURE,
    DEFAULT_WARMUP,
};

pub use adam::{AdamConfig, AdamState};
pub use mlp::{bce_per_sample, mean_bce, Mlp, PROB_CLAMP};

pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_EPOCHS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub epochs: usize,
    /// Selection pressure `s_e`.
    pub pressure: f64,
    pub warmup_epochs: usize,
    /// Neighbours for local imbalance.
    pub k: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub standardize: bool,
    /// Hidden layer widths; `None` means one layer of `max(64, 4q)`.
    pub hidden: Option<Vec<usize>>,
    pub threshold: f64,
    /// Validation metric that picks the reported epoch.
    pub selection_metric: MetricKind,
    /// Epochs (1-based) after which full training losses are kept.
    pub loss_snapshot_epochs: Vec<usize>,
    /// Keep the test scores of the reported epoch.
    pub keep_test_scores: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Adaptive,
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: DEFAULT_EPOCHS,
            pressure: DEFAULT_PRESSURE,
            warmup_epochs: DEFAULT_WARMUP,
            k: DEFAULT_K,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            standardize: false,
            hidden: None,
            threshold: DEFAULT_THRESHOLD,
            selection_metric: MetricKind::MacroAuc,
            loss_snapshot_epochs: Vec::new(),
            keep_test_scores: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("batch size must be positive".to_string());
        }
        if self.epochs == 0 {
            problems.push("epochs must be positive".to_string());
        }
        if !(self.pressure.is_finite() && self.pressure >= 1.0) {
            problems.push(format!("selection pressure {} must be >= 1", self.pressure));
        }
        if self.k == 0 {
            problems.push("k must be positive".to_string());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            problems.push(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            problems.push(format!("weight decay {} must be >= 0", self.weight_decay));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            problems.push(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if let Some(h) = &self.hidden {
            if h.contains(&0) {
                problems.push("hidden layer widths must be positive".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(problems.join("; ")))
        }
    }

    pub fn layer_sizes(&self, d: usize, q: usize) -> Vec<usize> {
        let hidden = self.hidden.clone().unwrap_or_else(|| vec![64.max(4 * q)]);
        std::iter::once(d).chain(hidden).chain(std::iter::once(q)).collect()
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    fn selector(&self) -> SelectorConfig {
        SelectorConfig {
            batch_size: self.batch_size,
            pressure: self.pressure,
            warmup_epochs: self.warmup_epochs,
            seed: self.seed,
        }
    }
}

/// Features and labels of one split, plus the training-set imbalance
/// profile. Shared read-only by every run on the split.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub split: Split,
    pub train_x: Array2<f64>,
    pub train_y: Array2<u8>,
    pub valid_x: Array2<f64>,
    pub valid_y: Array2<u8>,
    pub test_x: Array2<f64>,
    pub test_y: Array2<u8>,
    pub profile: ImbalanceProfile,
    pub chain: ChainContext,
    /// Label cardinality of the training rows.
    pub card: f64,
}

impl TrainingData {
    /// Standardization (if requested) is fitted on training rows only, and
    /// the imbalance profile uses training rows only.
    pub fn prepare(dataset: &Dataset, split: &Split, standardize: bool, k: usize) -> Result<Self> {
        split.check_non_empty()?;
        let n = dataset.n_instances();
        if let Some(&i) = split.train.iter().chain(&split.validation).chain(&split.test).find(|&&i| i >= n) {
            return Err(Error::Argument(format!("split index {i} out of range for {n} instances")));
        }
        let features = if standardize {
            Standardizer::fit(dataset.features(), &split.train)?.transform(dataset.features())
        } else {
            dataset.features().clone()
        };
        let rows = |idx: &[usize]| (features.select(Axis(0), idx), dataset.labels().select(Axis(0), idx));
        let (train_x, train_y) = rows(&split.train);
        let (valid_x, valid_y) = rows(&split.validation);
        let (test_x, test_y) = rows(&split.test);
        let profile = ImbalanceProfile::build(&train_x, &train_y, k)?;
        let card = train_y.iter().map(|&v| f64::from(v)).sum::<f64>() / train_y.nrows() as f64;
        let chain = ChainContext::new(train_y.clone(), profile.irlbl.clone(), profile.adjacency.clone(), card)?;
        Ok(Self {
            split: split.clone(),
            train_x,
            train_y,
            valid_x,
            valid_y,
            test_x,
            test_y,
            profile,
            chain,
            card,
        })
    }

    pub fn n_train(&self) -> usize {
        self.train_x.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    /// 1-based epoch.
    pub epoch: usize,
    /// 1-based batch counter over the whole run.
    pub batch: usize,
    pub wallclock_ms: f64,
    /// Mean BCE of the batch before the step.
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean BCE over the whole training set after the epoch.
    pub train_loss: f64,
    pub validation: MetricReport,
    pub wallclock_ms: f64,
}

/// Per-sample training losses after an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSnapshot {
    pub epoch: usize,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub strategy: Strategy,
    pub seed: u64,
    pub batches: Vec<BatchRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose validation score was best.
    pub best_epoch: usize,
    /// Test metrics at the best epoch.
    pub test: MetricReport,
    pub test_scores: Option<Array2<f64>>,
    pub loss_snapshots: Vec<LossSnapshot>,
}

/// What an observer sees after every optimizer step.
#[derive(Debug)]
pub struct BatchEvent<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub batch_in_epoch: usize,
    pub warmup: bool,
    /// Training-set row positions of the batch.
    pub indices: &'a [usize],
    /// Selection probabilities of the batch members at draw time.
    pub probabilities: &'a [f64],
    pub losses: &'a [f64],
    /// Selector state after the loss update.
    pub state: &'a SelectionState,
}

pub trait TrainObserver {
    fn on_batch(&mut self, event: &BatchEvent<'_>) -> Result<()>;
}

impl TrainObserver for () {
    fn on_batch(&mut self, _: &BatchEvent<'_>) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&BatchEvent<'_>) -> Result<()>> TrainObserver for F {
    fn on_batch(&mut self, event: &BatchEvent<'_>) -> Result<()> {
        self(event)
    }
}

#[derive(Debug, Clone)]
struct Best {
    epoch: usize,
    score: f64,
    test: MetricReport,
    test_scores: Option<Array2<f64>>,
}

/// A run in progress. Cloning snapshots the model, optimizer, selector and
/// log, which is how several strategies share one warm-up.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    data: &'a TrainingData,
    config: TrainConfig,
    model: Mlp,
    adam: AdamState,
    selector: BatchSelector,
    epochs_done: usize,
    batches_done: usize,
    elapsed: Duration,
    batches: Vec<BatchRecord>,
    epochs: Vec<EpochRecord>,
    best: Option<Best>,
    snapshots: Vec<LossSnapshot>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a TrainingData, config: TrainConfig) -> Result<Self> {
        let weights = data.profile.weights.clone();
        Self::with_weights(data, config, weights)
    }

    /// Like [`Trainer::new`] with explicit instance weights.
    pub fn with_weights(data: &'a TrainingData, config: TrainConfig, weights: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let n = data.n_train();
        if config.batch_size > n {
            return Err(Error::Argument(format!(
                "batch size {} exceeds the {n} training rows",
                config.batch_size
            )));
        }
        let sizes = config.layer_sizes(data.train_x.ncols(), data.train_y.ncols());
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = Mlp::init(&sizes, &mut init_rng)?;
        let adam = AdamState::new(model.params().len(), config.adam())?;
        let selector = BatchSelector::new(
            config.strategy,
            n,
            config.selector(),
            weights,
            Some(data.chain.clone()),
        )?;
        Ok(Self {
            data,
            config,
            model,
            adam,
            selector,
            epochs_done: 0,
            batches_done: 0,
            elapsed: Duration::ZERO,
            batches: Vec::new(),
            epochs: Vec::new(),
            best: None,
            snapshots: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn selector(&self) -> &BatchSelector {
        &self.selector
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn batch_records(&self) -> &[BatchRecord] {
        &self.batches
    }

    pub fn epoch_records(&self) -> &[EpochRecord] {
        &self.epochs
    }

    /// Switches strategy, keeping model, optimizer, stored losses and log.
    pub fn set_strategy(&mut self, strategy: Strategy) -> Result<()> {
        self.selector.switch_strategy(
            strategy,
            self.data.profile.weights.clone(),
            Some(self.data.chain.clone()),
        )?;
        self.config.strategy = strategy;
        Ok(())
    }

    /// One optimizer step on the given training rows. Returns the
    /// per-sample losses of the forward pass.
    pub fn step(&mut self, indices: &[usize]) -> Result<Vec<f64>> {
        let x = self.data.train_x.select(Axis(0), indices);
        let y = self.data.train_y.select(Axis(0), indices);
        let (grad, losses) = self.model.gradient(x.view(), y.view())?;
        self.adam.step(self.model.params_mut(), &grad)?;
        self.selector.record_losses(indices, &losses)?;
        // strict positivity of every selection probability
        self.selector.state().check_invariants()?;
        Ok(losses)
    }

    /// Runs one epoch of batches followed by evaluation.
    pub fn run_epoch(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        let started = Instant::now();
        let base = self.elapsed;
        let epoch = self.epochs_done + 1;
        for _ in 0..self.selector.batches_per_epoch() {
            let warmup = self.selector.in_warmup();
            let batch = self.selector.next_batch()?;
            let losses = self.step(&batch.indices)?;
            self.batches_done += 1;
            let train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
            self.batches.push(BatchRecord {
                epoch,
                batch: self.batches_done,
                wallclock_ms: (base + started.elapsed()).as_secs_f64() * 1e3,
                train_loss,
            });
            observer.on_batch(&BatchEvent {
                epoch,
                batch: self.batches_done,
                batch_in_epoch: batch.batch_in_epoch,
                warmup,
                indices: &batch.indices,
                probabilities: &batch.probabilities,
                losses: &losses,
                state: self.selector.state(),
            })?;
        }
        self.finish_epoch(epoch)?;
        self.epochs_done = epoch;
        self.elapsed = base + started.elapsed();
        let wallclock_ms = self.elapsed.as_secs_f64() * 1e3;
        if let Some(last) = self.epochs.last_mut() {
            last.wallclock_ms = wallclock_ms;
        }
        Ok(())
    }

    fn finish_epoch(&mut self, epoch: usize) -> Result<()> {
        let train_losses = self.training_losses()?;
        let train_loss = train_losses.iter().sum::<f64>() / train_losses.len() as f64;
        let valid_scores = self.model.forward(self.data.valid_x.view())?;
        let validation = evaluate(&valid_scores, &self.data.valid_y, self.config.threshold)?;
        let metric = self.config.selection_metric;
        let score = validation.get(metric);
        let improved = match &self.best {
            None => true,
            Some(_) if score.is_nan() => false,
            Some(best) if best.score.is_nan() => true,
            Some(best) => {
                if metric.higher_is_better() {
                    score > best.score
                } else {
                    score < best.score
                }
            }
        };
        if improved {
            let test_scores = self.model.forward(self.data.test_x.view())?;
            let test = evaluate(&test_scores, &self.data.test_y, self.config.threshold)?;
            self.best = Some(Best {
                epoch,
                score,
                test,
                test_scores: self.config.keep_test_scores.then_some(test_scores),
            });
        }
        if self.config.loss_snapshot_epochs.contains(&epoch) {
            self.snapshots.push(LossSnapshot {
                epoch,
                losses: train_losses,
            });
        }
        self.epochs.push(EpochRecord {
            epoch,
            train_loss,
            validation,
            wallclock_ms: 0.0,
        });
        Ok(())
    }

    /// Per-sample BCE of the current model over all training rows.
    pub fn training_losses(&self) -> Result<Vec<f64>> {
        let p = self.model.forward(self.data.train_x.view())?;
        bce_per_sample(p.view(), self.data.train_y.view())
    }

    /// Trains until `epoch` epochs are complete.
    pub fn run_until(&mut self, epoch: usize, observer: &mut dyn TrainObserver) -> Result<()> {
        while self.epochs_done < epoch {
            self.run_epoch(observer)?;
        }
        Ok(())
    }

    /// Runs the remaining epochs and returns the model and log.
    pub fn finish(mut self, observer: &mut dyn TrainObserver) -> Result<(Mlp, RunLog)> {
        let total = self.config.epochs;
        self.run_until(total, observer)?;
        let best = self.best.expect("at least one epoch ran");
        let log = RunLog {
            strategy: self.config.strategy,
            seed: self.config.seed,
            batches: self.batches,
            epochs: self.epochs,
            best_epoch: best.epoch,
            test: best.test,
            test_scores: best.test_scores,
            loss_snapshots: self.snapshots,
        };
        Ok((self.model, log))
    }
}

/// Trains one model with the configured strategy on `split`.
pub fn train(dataset: &Dataset, split: &Split, config: &TrainConfig) -> Result<(Mlp, RunLog)> {
    config.validate()?;
    let data = TrainingData::prepare(dataset, split, config.standardize, config.k)?;
    Trainer::new(&data, config.clone())?.finish(&mut ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FoldSplit;
    use crate::synthetic::{generate, SyntheticConfig};

    fn small() -> (Dataset, Split) {
        let cfg = SyntheticConfig {
            n: 200,
            d: 5,
            q: 4,
            rare_labels: 1,
            rare_rate: 0.05,
            ..SyntheticConfig::default()
        };
        let ds = generate(&cfg, 3).unwrap();
        let split = FoldSplit::new(200, 5, 1).unwrap().split(0, 0.1, 1).unwrap();
        (ds, split)
    }

    fn config(strategy: Strategy) -> TrainConfig {
        TrainConfig {
            strategy,
            batch_size: 32,
            epochs: 6,
            warmup_epochs: 2,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn deterministic_runs() {
        let (ds, split) = small();
        let (m1, a) = train(&ds, &split, &config(Strategy::Adaptive)).unwrap();
        let (m2, b) = train(&ds, &split, &config(Strategy::Adaptive)).unwrap();
        assert_eq!(m1, m2);
        let losses = |log: &RunLog| log.batches.iter().map(|b| b.train_loss).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn all_warmup_equals_random() {
        let (ds, split) = small();
        let mut cfg = config(Strategy::Adaptive);
        cfg.warmup_epochs = cfg.epochs;
        let (ma, a) = train(&ds, &split, &cfg).unwrap();
        cfg.strategy = Strategy::Random;
        let (mr, r) = train(&ds, &split, &cfg).unwrap();
        assert_eq!(ma, mr);
        let strip = |log: &RunLog| log.batches.iter().map(|b| (b.epoch, b.batch, b.train_loss)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&r));
        assert_eq!(a.test, r.test);
    }

    #[test]
    fn shared_warmup_matches_direct_run() {
        let (ds, split) = small();
        let data = TrainingData::prepare(&ds, &split, false, 5).unwrap();
        let mut base = Trainer::new(&data, config(Strategy::Random)).unwrap();
        base.run_until(2, &mut ()).unwrap();
        for s in [Strategy::Hard, Strategy::Adaptive, Strategy::AdaptiveChain] {
            let mut branch = base.clone();
            branch.set_strategy(s).unwrap();
            let (m1, _) = branch.finish(&mut ()).unwrap();
            let (m2, _) = Trainer::new(&data, config(s)).unwrap().finish(&mut ()).unwrap();
            assert_eq!(m1, m2, "{s}");
        }
    }

    #[test]
    fn weights_never_touch_parameters() {
        let (ds, split) = small();
        let data = TrainingData::prepare(&ds, &split, false, 5).unwrap();
        let n = data.n_train();
        let mut plain = Trainer::with_weights(&data, config(Strategy::Adaptive), vec![1.0; n]).unwrap();
        let skewed: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let mut weighted = Trainer::with_weights(&data, config(Strategy::Adaptive), skewed).unwrap();
        for t in 0..20 {
            let batch: Vec<usize> = (0..16).map(|j| (t * 11 + j * 5) % n).collect();
            plain.step(&batch).unwrap();
            weighted.step(&batch).unwrap();
        }
        assert_ne!(plain.selector().state().weighted_loss(), weighted.selector().state().weighted_loss());
        assert_eq!(plain.model().params(), weighted.model().params());
    }

    #[test]
    fn log_shape() {
        let (ds, split) = small();
        let mut cfg = config(Strategy::AdaptiveChain);
        cfg.loss_snapshot_epochs = vec![3];
        let (_, log) = train(&ds, &split, &cfg).unwrap();
        let per_epoch = split.train.len().div_ceil(32);
        assert_eq!(log.batches.len(), per_epoch * 6);
        assert_eq!(log.epochs.len(), 6);
        assert!(log.batches.windows(2).all(|w| w[0].wallclock_ms <= w[1].wallclock_ms));
        assert!((1..=6).contains(&log.best_epoch));
        assert_eq!(log.loss_snapshots.len(), 1);
        assert_eq!(log.loss_snapshots[0].losses.len(), split.train.len());
    }

    #[test]
    fn rejects_bad_config() {
        let (ds, split) = small();
        let mut cfg = config(Strategy::Random);
        cfg.pressure = 0.5;
        assert!(train(&ds, &split, &cfg).is_err());
        let mut cfg = config(Strategy::Random);
        cfg.batch_size = 10_000;
        assert!(train(&ds, &split, &cfg).is_err());
        let empty = Split {
            train: vec![],
            validation: vec![0],
            test: vec![1],
        };
        assert!(train(&ds, &empty, &config(Strategy::Random)).is_err());
    }
}
