use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{load_arff, load_csv, Dataset, LabelSpec};
use crate::error::{Error, Result};
use crate::metrics::{MetricKind, DEFAULT_THRESHOLD};
use crate::selector::{Strategy, DEFAULT_PRESSURE, DEFAULT_WARMUP};
use crate::trainer::{TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS};

/// Settings as `key -> raw value`, keyed by flag name without dashes
/// (`batch-size`, `se`, ...).
pub type Settings = BTreeMap<String, String>;

/// Every recognised setting key.
pub const KEYS: &[&str] = &[
    "dataset",
    "format",
    "labels",
    "strategies",
    "se",
    "batch-size",
    "epochs",
    "warmup",
    "k",
    "folds",
    "seeds",
    "standardize",
    "out",
    "dump-scores",
    "debug-batches",
    "dump-profile",
    "metric",
    "threshold",
    "density-epochs",
    "validation-fraction",
    "split-seed",
    "lr",
    "weight-decay",
    "hidden",
];

fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-").to_ascii_lowercase()
}

/// Parses a `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("config line {}: expected 'key = value'", i + 1)))?;
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Argument(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn read_settings(path: impl AsRef<Path>) -> Result<Settings> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_settings(&text)
}

/// Overlays `flags` on `base`; flags win.
pub fn merge_settings(mut base: Settings, flags: Settings) -> Settings {
    for (k, v) in flags {
        base.insert(normalize_key(&k), v);
    }
    base
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Arff,
    Csv,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arff" => Ok(DataFormat::Arff),
            "csv" => Ok(DataFormat::Csv),
            other => Err(Error::Argument(format!("unknown format '{other}' (expected arff or csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub format: DataFormat,
    /// Label list path or trailing label count, as given.
    pub labels: Option<String>,
    pub strategies: Vec<Strategy>,
    pub pressure: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup: usize,
    pub k: usize,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub standardize: bool,
    pub out: PathBuf,
    pub dump_scores: bool,
    pub debug_batches: bool,
    pub dump_profile: bool,
    pub metric: MetricKind,
    pub threshold: f64,
    /// Epochs with a loss-density snapshot; `None` picks the first
    /// post-warm-up epoch and the last epoch.
    pub density_epochs: Option<Vec<usize>>,
    pub validation_fraction: f64,
    pub split_seed: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden: Option<Vec<usize>>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Argument(format!("invalid value '{value}' for {key}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Argument(format!("{key} needs at least one value")));
    }
    Ok(items)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(Error::Argument(format!("invalid boolean '{other}' for {key}"))),
    }
}

impl ExperimentConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        if let Some(k) = settings.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Argument(format!("unknown setting '{k}'")));
        }
        let get = |k: &str| settings.get(k).map(String::as_str);
        let dataset = PathBuf::from(get("dataset").ok_or_else(|| Error::Argument("--dataset is required".into()))?);
        let format = match get("format") {
            Some(f) => f.parse()?,
            None => match dataset.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
                Some("csv") => DataFormat::Csv,
                Some("arff") => DataFormat::Arff,
                _ => return Err(Error::Argument("--format is required when the file extension is not .arff or .csv".into())),
            },
        };
        let mut strategies: Vec<Strategy> = match get("strategies") {
            Some(v) => parse_list("strategies", v)?,
            None => vec![Strategy::Random, Strategy::Adaptive],
        };
        let mut seen = Vec::new();
        strategies.retain(|s| {
            let fresh = !seen.contains(s);
            seen.push(*s);
            fresh
        });
        let config = Self {
            format,
            labels: get("labels").map(str::to_string),
            strategies,
            pressure: get("se").map(|v| parse("se", v)).transpose()?.unwrap_or(DEFAULT_PRESSURE),
            batch_size: get("batch-size").map(|v| parse("batch-size", v)).transpose()?.unwrap_or(DEFAULT_BATCH_SIZE),
            epochs: get("epochs").map(|v| parse("epochs", v)).transpose()?.unwrap_or(DEFAULT_EPOCHS),
            warmup: get("warmup").map(|v| parse("warmup", v)).transpose()?.unwrap_or(DEFAULT_WARMUP),
            k: get("k").map(|v| parse("k", v)).transpose()?.unwrap_or(crate::imbalance::DEFAULT_K),
            folds: get("folds").map(|v| parse("folds", v)).transpose()?.unwrap_or(5),
            seeds: get("seeds").map(|v| parse_list("seeds", v)).transpose()?.unwrap_or_else(|| vec![1]),
            standardize: get("standardize").map(|v| parse_bool("standardize", v)).transpose()?.unwrap_or(false),
            out: PathBuf::from(get("out").unwrap_or("results")),
            dump_scores: get("dump-scores").map(|v| parse_bool("dump-scores", v)).transpose()?.unwrap_or(false),
            debug_batches: get("debug-batches").map(|v| parse_bool("debug-batches", v)).transpose()?.unwrap_or(false),
            dump_profile: get("dump-profile").map(|v| parse_bool("dump-profile", v)).transpose()?.unwrap_or(false),
            metric: get("metric").map(|v| v.parse()).transpose()?.unwrap_or(MetricKind::MacroAuc),
            threshold: get("threshold").map(|v| parse("threshold", v)).transpose()?.unwrap_or(DEFAULT_THRESHOLD),
            density_epochs: get("density-epochs").map(|v| parse_list("density-epochs", v)).transpose()?,
            validation_fraction: get("validation-fraction")
                .map(|v| parse("validation-fraction", v))
                .transpose()?
                .unwrap_or(0.1),
            split_seed: get("split-seed").map(|v| parse("split-seed", v)).transpose()?.unwrap_or(0),
            learning_rate: get("lr").map(|v| parse("lr", v)).transpose()?.unwrap_or(1e-3),
            weight_decay: get("weight-decay").map(|v| parse("weight-decay", v)).transpose()?.unwrap_or(1e-4),
            hidden: get("hidden").map(|v| parse_list("hidden", v)).transpose()?,
            dataset,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Argument(format!("--folds must be at least 2, got {}", self.folds)));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "validation fraction {} must lie in (0, 1)",
                self.validation_fraction
            )));
        }
        if let Some(e) = self.density_epochs.iter().flatten().find(|&&e| e == 0 || e > self.epochs) {
            return Err(Error::Argument(format!("density epoch {e} outside 1..={}", self.epochs)));
        }
        if self.format == DataFormat::Csv {
            match &self.labels {
                None => return Err(Error::Argument("--labels <count> is required for CSV input".into())),
                Some(l) if l.trim().parse::<usize>().is_err() => {
                    return Err(Error::Argument(format!("--labels for CSV must be a count, got '{l}'")))
                }
                _ => {}
            }
        }
        self.train_config(Strategy::Random, 0).validate()
    }

    /// Snapshot epochs after defaults are applied.
    pub fn snapshot_epochs(&self) -> Vec<usize> {
        match &self.density_epochs {
            Some(e) => e.clone(),
            None => {
                let mut e = vec![(self.warmup + 1).min(self.epochs), self.epochs];
                e.dedup();
                e
            }
        }
    }

    pub fn train_config(&self, strategy: Strategy, seed: u64) -> TrainConfig {
        TrainConfig {
            strategy,
            batch_size: self.batch_size,
            epochs: self.epochs,
            pressure: self.pressure,
            warmup_epochs: self.warmup,
            k: self.k,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            seed,
            standardize: self.standardize,
            hidden: self.hidden.clone(),
            threshold: self.threshold,
            selection_metric: self.metric,
            loss_snapshot_epochs: self.snapshot_epochs(),
            keep_test_scores: self.dump_scores,
        }
    }

    /// Dataset name used in summaries: the file stem.
    pub fn dataset_name(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    /// Loads the dataset. For ARFF without `--labels`, a sibling
    /// `<stem>.xml` label list is used when present.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match self.format {
            DataFormat::Csv => {
                let count = self.labels.as_deref().unwrap_or("").trim().parse::<usize>().map_err(|_| {
                    Error::Argument("--labels <count> is required for CSV input".into())
                })?;
                load_csv(&self.dataset, count)
            }
            DataFormat::Arff => {
                let spec = match &self.labels {
                    Some(l) => LabelSpec::parse(l),
                    None => {
                        let xml = self.dataset.with_extension("xml");
                        if xml.exists() {
                            LabelSpec::File(xml)
                        } else {
                            return Err(Error::Argument(
                                "--labels is required for ARFF input (label list file or trailing count)".into(),
                            ));
                        }
                    }
                };
                load_arff(&self.dataset, &spec)
            }
        }
    }
}
