//! Seeded imbalanced multi-label data from noisy linear scores.
//!
//! Features are standard normal. Label `j` scores every row with a random
//! unit direction plus Gaussian noise and marks the top `rate_j` fraction
//! positive, so each label's positive count is fixed by its rate. The first
//! `rare_labels` labels use `rare_rate`; the rest spread evenly over
//! `common_rates`.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub q: usize,
    pub rare_labels: usize,
    pub rare_rate: f64,
    /// Lowest and highest positive rate of the remaining labels.
    pub common_rates: (f64, f64),
    /// Standard deviation of the score noise.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 20,
            q: 10,
            rare_labels: 2,
            rare_rate: 0.02,
            common_rates: (0.1, 0.4),
            noise: 0.5,
        }
    }
}

impl SyntheticConfig {
    /// Target positive rate of every label.
    pub fn rates(&self) -> Vec<f64> {
        let common = self.q - self.rare_labels.min(self.q);
        let (lo, hi) = self.common_rates;
        (0..self.q)
            .map(|j| {
                if j < self.rare_labels {
                    self.rare_rate
                } else if common == 1 {
                    lo
                } else {
                    let t = (j - self.rare_labels) as f64 / (common - 1) as f64;
                    lo + t * (hi - lo)
                }
            })
            .collect()
    }
}

pub fn generate(config: &SyntheticConfig, seed: u64) -> Result<Dataset> {
    let SyntheticConfig { n, d, q, .. } = *config;
    if n < 2 || d == 0 || q == 0 {
        return Err(Error::Argument(format!("synthetic shape n={n}, d={d}, q={q} is too small")));
    }
    if config.rare_labels > q {
        return Err(Error::Argument(format!("{} rare labels exceed q = {q}", config.rare_labels)));
    }
    let rates = config.rates();
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::Argument(format!("positive rate {r} must lie in (0, 1)")));
    }
    if !(config.noise.is_finite() && config.noise >= 0.0) {
        return Err(Error::Argument(format!("noise {} must be >= 0", config.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let features = Array2::from_shape_simple_fn((n, d), &mut normal);
    let mut directions = Array2::from_shape_simple_fn((d, q), &mut normal);
    for mut col in directions.columns_mut() {
        let norm = col.dot(&col).sqrt().max(f64::MIN_POSITIVE);
        col /= norm;
    }
    let noise = Array2::from_shape_simple_fn((n, q), &mut normal) * config.noise;
    let scores = features.dot(&directions) + noise;
    let mut labels = Array2::<u8>::zeros((n, q));
    for (j, &rate) in rates.iter().enumerate() {
        let positives = ((rate * n as f64).round() as usize).clamp(1, n - 1);
        let col: Array1<f64> = scores.column(j).to_owned();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
        for &i in &order[..positives] {
            labels[[i, j]] = 1;
        }
    }
    Dataset::from_arrays(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_and_rates() {
        let ds = generate(&SyntheticConfig::default(), 1).unwrap();
        assert_eq!((ds.n_instances(), ds.n_features(), ds.n_labels()), (2000, 20, 10));
        let counts: Vec<usize> = ds
            .labels()
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|&v| v as usize).sum())
            .collect();
        assert_eq!(counts[0], 40);
        assert_eq!(counts[1], 40);
        assert_eq!(counts[2], 200);
        assert_eq!(counts[9], 800);
    }

    #[test]
    fn seeded() {
        let cfg = SyntheticConfig {
            n: 50,
            ..SyntheticConfig::default()
        };
        assert_eq!(generate(&cfg, 4).unwrap(), generate(&cfg, 4).unwrap());
        assert_ne!(generate(&cfg, 4).unwrap(), generate(&cfg, 5).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SyntheticConfig {
            rare_labels: 11,
            ..SyntheticConfig::default()
        };
        assert!(generate(&cfg, 0).is_err());
    }
}
