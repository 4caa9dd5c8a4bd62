use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Assignment of every instance to one of `fold_count` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_count: usize,
    pub assignments: Vec<usize>,
}

/// Disjoint train / validation / test row sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn kfold(dataset: &Dataset, fold_count: usize, seed: u64) -> Result<FoldSplit> {
    FoldSplit::new(dataset.n_instances(), fold_count, seed)
}

impl FoldSplit {
    /// Shuffles `0..n` with a seeded generator and deals the permutation
    /// round-robin, so fold sizes differ by at most one.
    pub fn new(n: usize, fold_count: usize, seed: u64) -> Result<Self> {
        if fold_count < 2 {
            return Err(Error::Argument(format!(
                "fold count must be at least 2, got {fold_count}"
            )));
        }
        if fold_count > n {
            return Err(Error::Argument(format!(
                "fold count {fold_count} exceeds instance count {n}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignments = vec![0; n];
        for (position, &row) in order.iter().enumerate() {
            assignments[row] = position % fold_count;
        }
        Ok(Self {
            fold_count,
            assignments,
        })
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (f == fold).then_some(i))
            .collect()
    }

    /// Uses `fold` as the test set. The remaining rows are shuffled with
    /// `seed` and a `validation_fraction` share (at least one row) is held
    /// out for model selection; the rest is training data.
    pub fn split(&self, fold: usize, validation_fraction: f64, seed: u64) -> Result<Split> {
        if fold >= self.fold_count {
            return Err(Error::Argument(format!(
                "fold {fold} out of range for {} folds",
                self.fold_count
            )));
        }
        if !(0.0..1.0).contains(&validation_fraction) || validation_fraction == 0.0 {
            return Err(Error::Argument(format!(
                "validation fraction must lie in (0, 1), got {validation_fraction}"
            )));
        }
        let test = self.fold_indices(fold);
        let mut rest: Vec<usize> = self
            .assignments
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (f != fold).then_some(i))
            .collect();
        let fold_seed = seed ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        rest.shuffle(&mut ChaCha8Rng::seed_from_u64(fold_seed));
        let n_val = ((rest.len() as f64 * validation_fraction).round() as usize).max(1);
        let mut validation = rest[..n_val.min(rest.len())].to_vec();
        let mut train = rest[n_val.min(rest.len())..].to_vec();
        validation.sort_unstable();
        train.sort_unstable();
        let split = Split {
            train,
            validation,
            test,
        };
        split.check_non_empty()?;
        Ok(split)
    }
}

impl Split {
    pub fn check_non_empty(&self) -> Result<()> {
        for (name, part) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            if part.is_empty() {
                return Err(Error::Argument(format!("{name} split is empty")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_into_five() {
        let f = FoldSplit::new(10, 5, 3).unwrap();
        assert_eq!(f.fold_sizes(), vec![2; 5]);
    }

    #[test]
    fn seven_into_five() {
        let f = FoldSplit::new(7, 5, 11).unwrap();
        let mut sizes = f.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 2, 2]);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            FoldSplit::new(50, 5, 9).unwrap(),
            FoldSplit::new(50, 5, 9).unwrap()
        );
        assert_ne!(
            FoldSplit::new(50, 5, 9).unwrap(),
            FoldSplit::new(50, 5, 10).unwrap()
        );
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(FoldSplit::new(3, 5, 0), Err(Error::Argument(_))));
        assert!(matches!(FoldSplit::new(3, 1, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn split_parts_are_disjoint_and_complete() {
        let f = FoldSplit::new(40, 5, 1).unwrap();
        let s = f.split(2, 0.1, 1).unwrap();
        assert_eq!(s.test.len(), 8);
        assert_eq!(s.validation.len(), 3);
        assert_eq!(s.train.len(), 29);
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_empty_train() {
        let f = FoldSplit::new(2, 2, 1).unwrap();
        assert!(matches!(f.split(0, 0.5, 0), Err(Error::Argument(_))));
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let f = FoldSplit::new(n, k, seed).unwrap();
            let mut seen = vec![0u32; n];
            for fold in 0..k {
                for i in f.fold_indices(fold) {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes = f.fold_sizes();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
    }
}
