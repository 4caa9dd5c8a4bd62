//! Cross-validated strategy comparisons.
//!
//! For every (fold, seed) pair the training split is prepared once, a single
//! model runs the warm-up epochs, and each requested strategy continues from
//! a copy of that checkpoint. Runs write their own files under
//! `runs/<run_id>/`; the top-level CSVs concatenate them in a fixed order.

mod compare;
mod config;
mod density;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{Dataset, FoldSplit};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::selector::Strategy;
use crate::trainer::{BatchEvent, RunLog, TrainObserver, Trainer, TrainingData};

pub use compare::{
    compare, compare_files, read_summary, Comparison, SummaryRow, Verdict, ALPHA, COMPARISON_HEADER,
    SUMMARY_HEADER,
};
pub use config::{merge_settings, parse_settings, read_settings, DataFormat, ExperimentConfig, Settings, KEYS};
pub use density::{density_snapshot, minority_counts, DensityBucket, DensityEntry, DensityRecord, LOG_OFFSET};

pub const CURVES_HEADER: [&str; 8] = [
    "run_id",
    "strategy",
    "seed",
    "fold",
    "epoch",
    "batch",
    "wallclock_ms",
    "train_loss",
];

pub const METRICS_HEADER: [&str; 12] = [
    "run_id",
    "strategy",
    "seed",
    "fold",
    "epoch",
    "split",
    "macro_f",
    "micro_f",
    "macro_auc",
    "ranking_loss",
    "hamming_loss",
    "one_error",
];

pub const DENSITY_HEADER: [&str; 5] = ["run_id", "epoch", "bucket", "sample_index", "log_loss"];

/// Per-epoch full-training-set losses.
pub const EPOCHS_HEADER: [&str; 7] = [
    "run_id",
    "strategy",
    "seed",
    "fold",
    "epoch",
    "wallclock_ms",
    "train_loss",
];

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MLBATCH_THREADS";

pub fn run_id(strategy: Strategy, fold: usize, seed: u64) -> String {
    format!("{strategy}-f{fold}-s{seed}")
}

/// Everything produced by one (strategy, fold, seed) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: String,
    pub strategy: Strategy,
    pub fold: usize,
    pub seed: u64,
    pub log: RunLog,
    /// Sample indices refer to dataset rows.
    pub density: Vec<DensityRecord>,
    /// Dataset rows of the test split, aligned with `log.test_scores`.
    pub test_rows: Vec<usize>,
    pub test_labels: Array2<u8>,
    /// JSON lines of the batch stream, when requested.
    pub batch_lines: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub out: PathBuf,
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

/// Records the batch stream as JSON lines with dataset row indices.
#[derive(Debug, Clone)]
struct BatchRecorder<'a> {
    enabled: bool,
    train_rows: &'a [usize],
    lines: Vec<String>,
}

impl TrainObserver for BatchRecorder<'_> {
    fn on_batch(&mut self, e: &BatchEvent<'_>) -> Result<()> {
        if self.enabled {
            let rows: Vec<usize> = e.indices.iter().map(|&i| self.train_rows[i]).collect();
            let line = serde_json::json!({
                "epoch": e.epoch,
                "batch": e.batch,
                "warmup": e.warmup,
                "indices": rows,
                "probabilities": e.probabilities,
            });
            self.lines.push(line.to_string());
        }
        Ok(())
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Argument(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))
}

/// Loads the configured dataset and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let dataset = config.load_dataset()?;
    run_experiment_on(&dataset, config)
}

/// Runs every (strategy, fold, seed) combination on an already loaded
/// dataset and writes all artifacts under `config.out`.
pub fn run_experiment_on(dataset: &Dataset, config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let folds = FoldSplit::new(dataset.n_instances(), config.folds, config.split_seed)?;
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    let groups: Vec<(usize, u64)> = (0..config.folds)
        .flat_map(|f| config.seeds.iter().map(move |&s| (f, s)))
        .collect();
    let pool = thread_pool()?;
    let results: Vec<Vec<RunResult>> = pool.install(|| {
        groups
            .par_iter()
            .map(|&(fold, seed)| run_group(dataset, &folds, config, fold, seed))
            .collect::<Result<_>>()
    })?;
    let runs: Vec<RunResult> = results.into_iter().flatten().collect();
    let dataset_name = config.dataset_name();
    let summary: Vec<SummaryRow> = runs.iter().map(|r| summary_row(r, &dataset_name)).collect();
    for (run, row) in runs.iter().zip(&summary) {
        write_run_files(&config.out.join("runs").join(&run.run_id), run, row, config, dataset.label_names())?;
    }
    write_rows(&config.out.join("curves.csv"), &CURVES_HEADER, runs.iter().flat_map(curve_rows))?;
    write_rows(&config.out.join("epochs.csv"), &EPOCHS_HEADER, runs.iter().flat_map(epoch_rows))?;
    write_rows(&config.out.join("metrics.csv"), &METRICS_HEADER, runs.iter().flat_map(metric_rows))?;
    write_rows(&config.out.join("density.csv"), &DENSITY_HEADER, runs.iter().flat_map(density_rows))?;
    write_rows(&config.out.join("summary.csv"), &SUMMARY_HEADER, summary.iter().map(SummaryRow::record))?;
    Ok(ExperimentOutcome {
        out: config.out.clone(),
        runs,
        summary,
    })
}

fn run_group(dataset: &Dataset, folds: &FoldSplit, config: &ExperimentConfig, fold: usize, seed: u64) -> Result<Vec<RunResult>> {
    let split = folds.split(fold, config.validation_fraction, config.split_seed)?;
    let data = TrainingData::prepare(dataset, &split, config.standardize, config.k)?;
    if config.dump_profile && Some(&seed) == config.seeds.first() {
        let dir = config.out.join("profiles").join(format!("fold{fold}"));
        let names: Vec<String> = dataset.label_names().to_vec();
        data.profile.write_debug_csv(&dir, &names)?;
    }
    let first = config.strategies[0];
    let mut base = Trainer::new(&data, config.train_config(first, seed))?;
    let mut recorder = BatchRecorder {
        enabled: config.debug_batches,
        train_rows: &data.split.train,
        lines: Vec::new(),
    };
    base.run_until(config.warmup.min(config.epochs), &mut recorder)?;
    let mut out = Vec::with_capacity(config.strategies.len());
    for &strategy in &config.strategies {
        let mut branch = base.clone();
        let mut rec = recorder.clone();
        branch.set_strategy(strategy)?;
        let (_, log) = branch.finish(&mut rec)?;
        let density = log
            .loss_snapshots
            .iter()
            .map(|s| {
                let mut d = density_snapshot(&s.losses, &data.train_y, &data.profile.minority_mask, s.epoch)?;
                for e in &mut d.entries {
                    e.sample_index = data.split.train[e.sample_index];
                }
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(RunResult {
            run_id: run_id(strategy, fold, seed),
            strategy,
            fold,
            seed,
            log,
            density,
            test_rows: data.split.test.clone(),
            test_labels: data.test_y.clone(),
            batch_lines: rec.lines,
        });
    }
    Ok(out)
}

fn summary_row(run: &RunResult, dataset: &str) -> SummaryRow {
    SummaryRow {
        run_id: run.run_id.clone(),
        dataset: dataset.to_string(),
        strategy: run.strategy,
        seed: run.seed,
        fold: run.fold,
        best_epoch: run.log.best_epoch,
        test: run.log.test,
    }
}

fn key(run: &RunResult) -> [String; 4] {
    [
        run.run_id.clone(),
        run.strategy.to_string(),
        run.seed.to_string(),
        run.fold.to_string(),
    ]
}

fn curve_rows(run: &RunResult) -> impl Iterator<Item = Vec<String>> + '_ {
    run.log.batches.iter().map(move |b| {
        let mut r = key(run).to_vec();
        r.extend([
            b.epoch.to_string(),
            b.batch.to_string(),
            b.wallclock_ms.to_string(),
            b.train_loss.to_string(),
        ]);
        r
    })
}

fn epoch_rows(run: &RunResult) -> impl Iterator<Item = Vec<String>> + '_ {
    run.log.epochs.iter().map(move |e| {
        let mut r = key(run).to_vec();
        r.extend([e.epoch.to_string(), e.wallclock_ms.to_string(), e.train_loss.to_string()]);
        r
    })
}

fn metric_row(run: &RunResult, epoch: usize, split: &str, m: &MetricReport) -> Vec<String> {
    let mut r = key(run).to_vec();
    r.push(epoch.to_string());
    r.push(split.to_string());
    r.extend(m.values().iter().map(|v| v.to_string()));
    r
}

fn metric_rows(run: &RunResult) -> impl Iterator<Item = Vec<String>> + '_ {
    run.log
        .epochs
        .iter()
        .map(move |e| metric_row(run, e.epoch, "validation", &e.validation))
        .chain(std::iter::once(metric_row(run, run.log.best_epoch, "test", &run.log.test)))
}

fn density_rows(run: &RunResult) -> impl Iterator<Item = Vec<String>> + '_ {
    run.density.iter().flat_map(move |d| {
        d.entries.iter().map(move |e| {
            vec![
                run.run_id.clone(),
                d.epoch.to_string(),
                e.bucket.to_string(),
                e.sample_index.to_string(),
                e.log_loss.to_string(),
            ]
        })
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header of a score dump: `sample_index`, one `score:<label>` column per
/// label, then one `label:<label>` column per label.
pub fn score_header(label_names: &[String]) -> Vec<String> {
    std::iter::once("sample_index".to_string())
        .chain(label_names.iter().map(|n| format!("score:{n}")))
        .chain(label_names.iter().map(|n| format!("label:{n}")))
        .collect()
}

/// Reads a score dump back into (scores, labels).
pub fn read_scores(path: impl AsRef<Path>) -> Result<(Vec<usize>, Array2<f64>, Array2<u8>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let width = reader.headers()?.len();
    if width < 3 || (width - 1) % 2 != 0 {
        return Err(Error::parse(1, format!("score dump has {width} columns")));
    }
    let q = (width - 1) / 2;
    let (mut rows, mut scores, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |e: String| Error::parse(i + 2, e);
        rows.push(rec[0].parse::<usize>().map_err(|e| bad(e.to_string()))?);
        for j in 0..q {
            scores.push(rec[1 + j].parse::<f64>().map_err(|e| bad(e.to_string()))?);
            labels.push(rec[1 + q + j].parse::<u8>().map_err(|e| bad(e.to_string()))?);
        }
    }
    let n = rows.len();
    let scores = Array2::from_shape_vec((n, q), scores).map_err(|e| Error::parse(1, e.to_string()))?;
    let labels = Array2::from_shape_vec((n, q), labels).map_err(|e| Error::parse(1, e.to_string()))?;
    Ok((rows, scores, labels))
}

fn write_run_files(
    dir: &Path,
    run: &RunResult,
    summary: &SummaryRow,
    config: &ExperimentConfig,
    label_names: &[String],
) -> Result<()> {
    write_rows(&dir.join("curves.csv"), &CURVES_HEADER, curve_rows(run))?;
    write_rows(&dir.join("epochs.csv"), &EPOCHS_HEADER, epoch_rows(run))?;
    write_rows(&dir.join("metrics.csv"), &METRICS_HEADER, metric_rows(run))?;
    write_rows(&dir.join("density.csv"), &DENSITY_HEADER, density_rows(run))?;
    write_rows(&dir.join("summary.csv"), &SUMMARY_HEADER, std::iter::once(summary.record()))?;
    if let Some(scores) = &run.log.test_scores {
        let rows = run.test_rows.iter().enumerate().map(|(i, &row)| {
            std::iter::once(row.to_string())
                .chain(scores.row(i).iter().map(|v| v.to_string()))
                .chain(run.test_labels.row(i).iter().map(|v| v.to_string()))
                .collect::<Vec<_>>()
        });
        let header = score_header(label_names);
        write_rows(&dir.join("test_scores.csv"), &header.iter().map(String::as_str).collect::<Vec<_>>(), rows)?;
    }
    if config.debug_batches {
        let path = dir.join("batches.jsonl");
        let mut w = create(&path)?;
        for line in &run.batch_lines {
            writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
