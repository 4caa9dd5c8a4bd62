use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{wilcoxon_signed_rank, MetricKind, MetricReport};
use crate::selector::Strategy;

/// Significance level of a win or loss verdict.
pub const ALPHA: f64 = 0.05;

pub const SUMMARY_HEADER: [&str; 12] = [
    "run_id",
    "dataset",
    "strategy",
    "seed",
    "fold",
    "best_epoch",
    "macro_f",
    "micro_f",
    "macro_auc",
    "ranking_loss",
    "hamming_loss",
    "one_error",
];

/// One final-test row per run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run_id: String,
    pub dataset: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub fold: usize,
    pub best_epoch: usize,
    pub test: MetricReport,
}

impl SummaryRow {
    pub fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.run_id.clone(),
            self.dataset.clone(),
            self.strategy.to_string(),
            self.seed.to_string(),
            self.fold.to_string(),
            self.best_epoch.to_string(),
        ];
        r.extend(self.test.values().iter().map(|v| v.to_string()));
        r
    }
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                line: 1,
                message: format!("{other:?}"),
            },
        })?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::parse(1, format!("{}: unexpected summary header {header:?}", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::parse(line, format!("column {}: {e}", SUMMARY_HEADER[k])))
        };
        let int = |k: usize| -> Result<u64> {
            rec[k]
                .parse::<u64>()
                .map_err(|e| Error::parse(line, format!("column {}: {e}", SUMMARY_HEADER[k])))
        };
        rows.push(SummaryRow {
            run_id: rec[0].to_string(),
            dataset: rec[1].to_string(),
            strategy: rec[2].parse().map_err(|e: Error| Error::parse(line, e.to_string()))?,
            seed: int(3)?,
            fold: int(4)? as usize,
            best_epoch: int(5)? as usize,
            test: MetricReport {
                macro_f: num(6)?,
                micro_f: num(7)?,
                macro_auc: num(8)?,
                ranking_loss: num(9)?,
                hamming_loss: num(10)?,
                one_error: num(11)?,
            },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Win,
    Tie,
    Loss,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Win => "win",
            Verdict::Tie => "tie",
            Verdict::Loss => "loss",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub candidate: Strategy,
    pub baseline: Strategy,
    pub metric: MetricKind,
    pub pairs: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

impl Comparison {
    /// `win (0.0002)` style cell.
    pub fn cell(&self) -> String {
        format!("{} ({:.4})", self.verdict, self.p_value)
    }
}

pub const COMPARISON_HEADER: [&str; 7] = [
    "candidate",
    "baseline",
    "metric",
    "pairs",
    "statistic",
    "p_value",
    "verdict",
];

type PairKey = (String, usize, u64);

fn by_key(rows: &[SummaryRow], strategy: Strategy) -> Result<BTreeMap<PairKey, MetricReport>> {
    let mut out = BTreeMap::new();
    for r in rows.iter().filter(|r| r.strategy == strategy) {
        let key = (r.dataset.clone(), r.fold, r.seed);
        if out.insert(key.clone(), r.test).is_some() {
            return Err(Error::Argument(format!(
                "duplicate {strategy} result for dataset {} fold {} seed {}",
                key.0, key.1, key.2
            )));
        }
    }
    Ok(out)
}

/// Wilcoxon comparison of every other strategy against `baseline`, paired
/// by (dataset, fold, seed). Pairs where either value is NaN are dropped.
pub fn compare(rows: &[SummaryRow], baseline: Strategy, metrics: &[MetricKind]) -> Result<Vec<Comparison>> {
    let base = by_key(rows, baseline)?;
    if base.is_empty() {
        return Err(Error::Argument(format!("no results for baseline strategy {baseline}")));
    }
    let mut candidates: Vec<Strategy> = rows.iter().map(|r| r.strategy).filter(|&s| s != baseline).collect();
    candidates.sort();
    candidates.dedup();
    if candidates.is_empty() {
        return Err(Error::Argument(format!("no strategy to compare against {baseline}")));
    }
    let mut out = Vec::new();
    for cand in candidates {
        let other = by_key(rows, cand)?;
        if let Some(k) = other.keys().find(|k| !base.contains_key(*k)).or_else(|| base.keys().find(|k| !other.contains_key(*k))) {
            return Err(Error::Argument(format!(
                "unpaired result between {cand} and {baseline}: dataset {} fold {} seed {}",
                k.0, k.1, k.2
            )));
        }
        for &metric in metrics {
            let (a, b): (Vec<f64>, Vec<f64>) = other
                .iter()
                .map(|(k, r)| (r.get(metric), base[k].get(metric)))
                .filter(|(x, y)| !x.is_nan() && !y.is_nan())
                .unzip();
            let (statistic, p_value, better) = if a.is_empty() {
                (0.0, 1.0, false)
            } else {
                let w = wilcoxon_signed_rank(&a, &b)?;
                let better = if metric.higher_is_better() {
                    w.w_plus > w.w_minus
                } else {
                    w.w_minus > w.w_plus
                };
                (w.statistic, w.p_value, better)
            };
            let verdict = if p_value < ALPHA {
                if better {
                    Verdict::Win
                } else {
                    Verdict::Loss
                }
            } else {
                Verdict::Tie
            };
            out.push(Comparison {
                candidate: cand,
                baseline,
                metric,
                pairs: a.len(),
                statistic,
                p_value,
                verdict,
            });
        }
    }
    Ok(out)
}

/// Reads and concatenates summary files, then compares.
pub fn compare_files<P: AsRef<Path>>(paths: &[P], baseline: Strategy, metrics: &[MetricKind]) -> Result<Vec<Comparison>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_summary(p)?);
    }
    compare(&rows, baseline, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(v: f64) -> MetricReport {
        MetricReport {
            macro_f: v,
            micro_f: v,
            macro_auc: v,
            ranking_loss: 1.0 - v,
            hamming_loss: 1.0 - v,
            one_error: 1.0 - v,
        }
    }

    fn rows(strategy: Strategy, values: &[f64]) -> Vec<SummaryRow> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| SummaryRow {
                run_id: format!("{strategy}-{i}"),
                dataset: "d".into(),
                strategy,
                seed: i as u64,
                fold: 0,
                best_epoch: 1,
                test: report(v),
            })
            .collect()
    }

    #[test]
    fn identical_results_tie() {
        let v: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let mut all = rows(Strategy::Random, &v);
        all.extend(rows(Strategy::Adaptive, &v));
        let c = compare(&all, Strategy::Random, &MetricKind::ALL).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.iter().all(|c| c.verdict == Verdict::Tie && c.p_value == 1.0));
    }

    #[test]
    fn thirteen_wins() {
        let base: Vec<f64> = (0..13).map(|i| 0.5 + i as f64 * 0.01).collect();
        let better: Vec<f64> = base.iter().enumerate().map(|(i, v)| v + 0.001 * (i + 1) as f64).collect();
        let mut all = rows(Strategy::Random, &base);
        all.extend(rows(Strategy::Adaptive, &better));
        let c = compare(&all, Strategy::Random, &[MetricKind::MacroAuc, MetricKind::HammingLoss]).unwrap();
        for cmp in &c {
            assert_eq!(cmp.verdict, Verdict::Win);
            assert!((cmp.p_value - 2.0 / 8192.0).abs() < 1e-12);
            assert_eq!(cmp.cell(), "win (0.0002)");
        }
    }

    #[test]
    fn missing_or_unpaired() {
        let only = rows(Strategy::Random, &[0.1, 0.2]);
        assert!(compare(&only, Strategy::Random, &MetricKind::ALL).is_err());
        let cand = rows(Strategy::Adaptive, &[0.1, 0.2]);
        assert!(compare(&cand, Strategy::Random, &MetricKind::ALL).is_err());
        let mut all = only.clone();
        all.extend(rows(Strategy::Adaptive, &[0.1]));
        assert!(matches!(compare(&all, Strategy::Random, &MetricKind::ALL), Err(Error::Argument(_))));
    }
}
