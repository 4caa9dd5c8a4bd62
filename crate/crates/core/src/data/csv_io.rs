use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

/// Loads a headed numeric CSV whose last `label_count` columns are labels.
pub fn load_csv(path: impl AsRef<Path>, label_count: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, label_count)
}

pub fn parse_csv<R: Read>(reader: R, label_count: usize) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::parse(1, "missing header row"));
    }
    let width = header.len();
    if label_count == 0 || label_count >= width {
        return Err(Error::Argument(format!(
            "label count {label_count} invalid for {width} columns"
        )));
    }
    let d = width - label_count;

    let mut feature_data = Vec::new();
    let mut label_data = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, .. } => Error::parse(
                pos.as_ref().map_or(0, |p| p.line() as usize),
                "row width differs from header",
            ),
            _ => Error::Csv(e),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(line, format!("`{cell}` is not numeric")))?;
            if j < d {
                feature_data.push(v);
            } else if v == 0.0 || v == 1.0 {
                label_data.push(v as u8);
            } else {
                return Err(Error::Validation(format!(
                    "label `{}` has non-binary value {v} at line {line}",
                    header[j]
                )));
            }
        }
    }
    let n = feature_data.len() / d;
    let features = Array2::from_shape_vec((n, d), feature_data).expect("rectangular");
    let labels = Array2::from_shape_vec((n, label_count), label_data).expect("rectangular");
    Dataset::new(
        features,
        labels,
        header[..d].to_vec(),
        header[d..].to_vec(),
    )
}

/// Writes features then labels under a single header row. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(
        dataset
            .feature_names()
            .iter()
            .chain(dataset.label_names()),
    )?;
    let mut row = Vec::with_capacity(dataset.n_features() + dataset.n_labels());
    for (x, y) in dataset.features().rows().into_iter().zip(dataset.labels().rows()) {
        row.clear();
        row.extend(x.iter().map(|v| v.to_string()));
        row.extend(y.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
