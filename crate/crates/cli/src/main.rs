//! `mlbatch`: run strategy comparisons, test them, and inspect datasets.
//!
//! Exit codes: 0 on success, 1 when the input data is unusable, 2 for usage
//! errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlbatch::data::write_csv;
use mlbatch::experiment::{
    compare_files, merge_settings, read_settings, run_experiment, ExperimentConfig, Settings, COMPARISON_HEADER,
};
use mlbatch::synthetic::{generate, SyntheticConfig};
use mlbatch::{Error, MetricKind, Strategy};

#[derive(Parser)]
#[command(name = "mlbatch", version, about = "Imbalance-aware adaptive batch selection for multi-label training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every strategy over folds and seeds and write CSV artifacts.
    Run(RunArgs),
    /// Wilcoxon comparison of strategies against a baseline.
    Compare(CompareArgs),
    /// Print dataset size and imbalance statistics.
    Stats(StatsArgs),
    /// Write a seeded synthetic imbalanced dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Plain `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// arff or csv; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Label list file, or the number of trailing label columns.
    #[arg(long)]
    labels: Option<String>,
    /// Comma-separated: random, hard, adaptive, adaptive-chain.
    #[arg(long)]
    strategies: Option<String>,
    /// Selection pressure.
    #[arg(long)]
    se: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Uniform warm-up epochs.
    #[arg(long)]
    warmup: Option<usize>,
    /// Neighbours for local imbalance.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// Z-score features with training-split statistics.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-run test score dumps.
    #[arg(long)]
    dump_scores: bool,
    /// Write every selected batch as JSON lines.
    #[arg(long)]
    debug_batches: bool,
    /// Write imbalance profiles per fold.
    #[arg(long)]
    dump_profile: bool,
    /// Validation metric choosing the best epoch.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated epochs with loss-density snapshots.
    #[arg(long)]
    density_epochs: Option<String>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Comma-separated hidden layer widths.
    #[arg(long)]
    hidden: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Settings {
        let mut s = Settings::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let flag = |b: bool| b.then(|| "true".to_string());
        put("dataset", path(&self.dataset));
        put("format", self.format.clone());
        put("labels", self.labels.clone());
        put("strategies", self.strategies.clone());
        put("se", self.se.map(|v| v.to_string()));
        put("batch-size", self.batch_size.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("warmup", self.warmup.map(|v| v.to_string()));
        put("k", self.k.map(|v| v.to_string()));
        put("folds", self.folds.map(|v| v.to_string()));
        put("seeds", self.seeds.clone());
        put("standardize", flag(self.standardize));
        put("out", path(&self.out));
        put("dump-scores", flag(self.dump_scores));
        put("debug-batches", flag(self.debug_batches));
        put("dump-profile", flag(self.dump_profile));
        put("metric", self.metric.clone());
        put("threshold", self.threshold.map(|v| v.to_string()));
        put("density-epochs", self.density_epochs.clone());
        put("validation-fraction", self.validation_fraction.map(|v| v.to_string()));
        put("split-seed", self.split_seed.map(|v| v.to_string()));
        put("lr", self.lr.map(|v| v.to_string()));
        put("weight-decay", self.weight_decay.map(|v| v.to_string()));
        put("hidden", self.hidden.clone());
        s
    }
}

#[derive(Args)]
struct CompareArgs {
    /// summary.csv files to pool.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    #[arg(long, default_value = "random")]
    baseline: String,
    /// Comma-separated metrics; all six when omitted.
    #[arg(long)]
    metric: Option<String>,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    labels: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    q: usize,
    #[arg(long, default_value_t = 2)]
    rare_labels: usize,
    #[arg(long, default_value_t = 0.02)]
    rare_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let base = match &args.config {
        Some(p) => read_settings(p).map_err(|e| match e {
            Error::Io { .. } => Error::Argument(format!("cannot read config {}: {e}", p.display())),
            other => other,
        })?,
        None => Settings::new(),
    };
    let config = ExperimentConfig::from_settings(&merge_settings(base, args.settings()))?;
    let outcome = run_experiment(&config)?;
    let mut stdout = io::stdout().lock();
    for row in &outcome.summary {
        let _ = writeln!(
            stdout,
            "{}\tbest_epoch={}\tmacro_auc={:.4}\tmacro_f={:.4}\tmicro_f={:.4}",
            row.run_id, row.best_epoch, row.test.macro_auc, row.test.macro_f, row.test.micro_f
        );
    }
    let _ = writeln!(stdout, "{} runs written to {}", outcome.runs.len(), outcome.out.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Error> {
    let baseline: Strategy = args.baseline.parse()?;
    let metrics: Vec<MetricKind> = match &args.metric {
        Some(list) => list.split(',').map(|m| m.trim().parse()).collect::<Result<_, _>>()?,
        None => MetricKind::ALL.to_vec(),
    };
    let table = compare_files(&args.summaries, baseline, &metrics)?;
    let mut stdout = io::stdout().lock();
    let _ = writeln!(stdout, "{:<16} {:<14} {:>5}  result", "candidate", "metric", "pairs");
    for c in &table {
        let _ = writeln!(stdout, "{:<16} {:<14} {:>5}  {}", c.candidate, c.metric.name(), c.pairs, c.cell());
    }
    if let Some(path) = &args.out {
        let file = File::create(path).map_err(|e| Error::Argument(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        let io_err = |e: io::Error| Error::Argument(format!("cannot write {}: {e}", path.display()));
        writeln!(w, "{}", COMPARISON_HEADER.join(",")).map_err(io_err)?;
        for c in &table {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.candidate,
                c.baseline,
                c.metric.name(),
                c.pairs,
                c.statistic,
                c.p_value,
                c.verdict
            )
            .map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> Result<(), Error> {
    let mut s = Settings::new();
    s.insert("dataset".into(), args.dataset.display().to_string());
    if let Some(f) = &args.format {
        s.insert("format".into(), f.clone());
    }
    if let Some(l) = &args.labels {
        s.insert("labels".into(), l.clone());
    }
    let ds = ExperimentConfig::from_settings(&s)?.load_dataset()?;
    let st = ds.stats();
    let irlbl = mlbatch::imbalance::irlbl(ds.labels())?;
    let mean_ir = mlbatch::imbalance::mean_ir(&irlbl)?;
    let minority = mlbatch::imbalance::minority_set(&irlbl, mean_ir);
    println!("n\t{}", ds.n_instances());
    println!("d\t{}", ds.n_features());
    println!("q\t{}", ds.n_labels());
    println!("card\t{:.4}", st.card);
    println!("dens\t{:.4}", st.dens);
    println!("mean_ir\t{:.4}", mean_ir);
    let names: Vec<&str> = ds
        .label_names()
        .iter()
        .zip(&minority)
        .filter(|(_, &m)| m)
        .map(|(n, _)| n.as_str())
        .collect();
    println!("minority\t{}", names.join(","));
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Error> {
    let cfg = SyntheticConfig {
        n: args.n,
        d: args.d,
        q: args.q,
        rare_labels: args.rare_labels,
        rare_rate: args.rare_rate,
        noise: args.noise,
        ..SyntheticConfig::default()
    };
    let ds = generate(&cfg, args.seed)?;
    let file = File::create(&args.out).map_err(|e| Error::Argument(format!("cannot write {}: {e}", args.out.display())))?;
    write_csv(&ds, BufWriter::new(file))?;
    println!("wrote {} ({} rows, {} labels)", args.out.display(), ds.n_instances(), ds.n_labels());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
