use std::fmt;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Offset added before taking the log of a loss.
pub const LOG_OFFSET: f64 = 1e-12;

/// Number of positive minority labels a sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DensityBucket {
    Zero,
    One,
    Two,
    MoreThanTwo,
}

impl DensityBucket {
    pub fn from_count(count: usize) -> Self {
        match count {
            0 => DensityBucket::Zero,
            1 => DensityBucket::One,
            2 => DensityBucket::Two,
            _ => DensityBucket::MoreThanTwo,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DensityBucket::Zero => "0",
            DensityBucket::One => "1",
            DensityBucket::Two => "2",
            DensityBucket::MoreThanTwo => ">2",
        }
    }
}

impl fmt::Display for DensityBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEntry {
    pub sample_index: usize,
    pub bucket: DensityBucket,
    /// `ln(loss + 1e-12)`.
    pub log_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRecord {
    pub epoch: usize,
    pub entries: Vec<DensityEntry>,
}

impl DensityRecord {
    /// Log losses of the entries in `bucket`.
    pub fn bucket_log_losses(&self, bucket: DensityBucket) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.bucket == bucket)
            .map(|e| e.log_loss)
            .collect()
    }
}

/// Positive minority labels per sample.
pub fn minority_counts(labels: &Array2<u8>, minority_mask: &[bool]) -> Vec<usize> {
    labels
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(minority_mask)
                .filter(|&(&y, &m)| y == 1 && m)
                .count()
        })
        .collect()
}

/// Buckets every sample by its positive minority label count and stores its
/// log loss. `sample_index` is the row position in `labels`.
pub fn density_snapshot(
    losses: &[f64],
    labels: &Array2<u8>,
    minority_mask: &[bool],
    epoch: usize,
) -> Result<DensityRecord> {
    if losses.len() != labels.nrows() || minority_mask.len() != labels.ncols() {
        return Err(Error::Argument(format!(
            "{} losses and {} mask entries for a {:?} label matrix",
            losses.len(),
            minority_mask.len(),
            labels.dim()
        )));
    }
    let entries = minority_counts(labels, minority_mask)
        .into_iter()
        .zip(losses)
        .enumerate()
        .map(|(i, (c, &l))| DensityEntry {
            sample_index: i,
            bucket: DensityBucket::from_count(c),
            log_loss: (l + LOG_OFFSET).ln(),
        })
        .collect();
    Ok(DensityRecord { epoch, entries })
}
