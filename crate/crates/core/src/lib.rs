//! Multi-label adaptive batch selection.
//!
//! The crate trains a small multi-label network while choosing each
//! mini-batch from a loss-proportional distribution. Samples carrying rare
//! ("minority") labels in locally imbalanced neighbourhoods get their loss
//! inflated before it is quantized into a bounded index, and the index sets
//! an exponential selection weight. A chained variant restricts each draw to
//! instances sharing labels correlated with the previous pick.
//!
//! Layout:
//!
//! - [`data`]: ARFF/CSV ingestion, dataset statistics, fold splits.
//! - [`imbalance`]: per-label imbalance ratios, local imbalance, instance
//!   weights, label adjacency.
//! - [`selector`]: selection state and the four batch strategies.
//! - [`trainer`]: reference MLP, BCE, Adam and the training loop.
//! - [`metrics`]: the six multi-label metrics and the Wilcoxon signed-rank test.
//! - [`experiment`]: cross-validated strategy comparisons and CSV artifacts.
//! - [`synthetic`]: generator for imbalanced linear-score datasets.

pub mod data;
pub mod error;
pub mod experiment;
pub mod imbalance;
pub mod metrics;
pub mod selector;
pub mod synthetic;
pub mod trainer;

pub use data::{Dataset, DatasetStats, FoldSplit, LabelSpec, Split};
pub use error::{Error, Result};
pub use imbalance::{ImbalanceProfile, LabelAdjacency};
pub use metrics::{MetricKind, MetricReport};
pub use selector::{BatchSelector, SelectionState, Strategy};
pub use trainer::{Mlp, TrainConfig};
