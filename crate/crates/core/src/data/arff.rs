//! ARFF reader for MULAN-style multi-label files.
//!
//! Labels are ordinary attributes; which ones they are comes from a
//! companion list (plain names or MULAN XML) or a trailing-column count.
//! Dense rows and sparse `{index value, ...}` rows are both accepted.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

/// How label attributes are identified in an ARFF file.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSpec {
    /// Label attribute names, given directly.
    Names(Vec<String>),
    /// Path to a label-list file (one name per line, or MULAN XML).
    File(PathBuf),
    /// The last `n` attributes are labels.
    Trailing(usize),
}

impl LabelSpec {
    /// Integers become [`LabelSpec::Trailing`]; anything else is a path.
    pub fn parse(arg: &str) -> Self {
        match arg.trim().parse::<usize>() {
            Ok(n) => LabelSpec::Trailing(n),
            Err(_) => LabelSpec::File(PathBuf::from(arg)),
        }
    }
}

#[derive(Debug, Clone)]
enum AttrKind {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    kind: AttrKind,
    line: usize,
}

pub fn load_arff(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let labels = match labels {
        LabelSpec::File(list) => LabelSpec::Names(read_label_list(list)?),
        other => other.clone(),
    };
    parse_arff(&text, &labels)
}

pub fn read_label_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names = parse_label_list(&text);
    if names.is_empty() {
        return Err(Error::parse(1, format!("no labels in {}", path.display())));
    }
    Ok(names)
}

/// Extracts label names from MULAN XML (`<label name="..."/>`) or, when no
/// `<label` tag is present, from non-empty lines.
pub fn parse_label_list(text: &str) -> Vec<String> {
    if text.contains("<label") {
        let mut names = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find("<label") {
            rest = &rest[start + "<label".len()..];
            // `<labels ...>` is the MULAN root element.
            if !rest.starts_with(|c: char| c.is_whitespace() || c == '/' || c == '>') {
                continue;
            }
            let tag_end = rest.find('>').unwrap_or(rest.len());
            if let Some(name) = xml_attribute(&rest[..tag_end], "name") {
                names.push(name);
            }
            rest = &rest[tag_end..];
        }
        names
    } else {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    }
}

fn xml_attribute(tag: &str, key: &str) -> Option<String> {
    let mut rest = tag;
    loop {
        let pos = rest.find(key)?;
        let before_ok = pos == 0 || rest[..pos].ends_with(char::is_whitespace);
        let after = rest[pos + key.len()..].trim_start();
        if before_ok {
            if let Some(after_eq) = after.strip_prefix('=') {
                let after_eq = after_eq.trim_start();
                let quote = after_eq.chars().next()?;
                if quote == '"' || quote == '\'' {
                    let body = &after_eq[1..];
                    let end = body.find(quote)?;
                    return Some(unescape_xml(&body[..end]));
                }
            }
        }
        rest = &rest[pos + key.len()..];
    }
}

fn unescape_xml(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Parses ARFF text. `labels` must be `Names` or `Trailing`; a `File` spec is
/// resolved by [`load_arff`].
pub fn parse_arff(text: &str, labels: &LabelSpec) -> Result<Dataset> {
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut saw_data = false;

    for (line_no, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let (keyword, rest) = split_keyword(line);
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => {}
            "@attribute" => attributes.push(parse_attribute(rest, line_no)?),
            "@data" => {
                saw_data = true;
                break;
            }
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("unexpected header line `{line}`"),
                ))
            }
        }
    }
    if !saw_data {
        return Err(Error::parse(
            text.lines().count().max(1),
            "missing @data section",
        ));
    }
    if attributes.is_empty() {
        return Err(Error::parse(1, "no @attribute declarations"));
    }

    let is_label = label_mask(&attributes, labels)?;
    for (attr, _) in attributes.iter().zip(&is_label).filter(|(_, &l)| l) {
        if let AttrKind::Nominal(values) = &attr.kind {
            if values.iter().any(|v| v != "0" && v != "1") {
                return Err(Error::Validation(format!(
                    "label attribute `{}` (line {}) is nominal over {{{}}}, expected {{0,1}}",
                    attr.name,
                    attr.line,
                    values.join(",")
                )));
            }
        }
    }

    let width = attributes.len();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (line_no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let values = if line.starts_with('{') {
            parse_sparse_row(line, &attributes, line_no)?
        } else {
            parse_dense_row(line, &attributes, line_no)?
        };
        debug_assert_eq!(values.len(), width);
        rows.push((line_no, values));
    }
    if rows.is_empty() {
        return Err(Error::Validation("ARFF file has no data rows".into()));
    }

    let n = rows.len();
    let q = is_label.iter().filter(|&&l| l).count();
    let d = width - q;
    let mut features = Array2::<f64>::zeros((n, d));
    let mut label_matrix = Array2::<u8>::zeros((n, q));
    for (i, (line_no, values)) in rows.iter().enumerate() {
        let (mut fj, mut lj) = (0, 0);
        for (a, &v) in values.iter().enumerate() {
            if is_label[a] {
                label_matrix[[i, lj]] = binary_label(v, &attributes[a].name, *line_no)?;
                lj += 1;
            } else {
                features[[i, fj]] = v;
                fj += 1;
            }
        }
    }
    let (feature_names, label_names) = attributes
        .iter()
        .zip(&is_label)
        .fold((Vec::new(), Vec::new()), |(mut f, mut l), (a, &lab)| {
            if lab {
                l.push(a.name.clone());
            } else {
                f.push(a.name.clone());
            }
            (f, l)
        });
    Dataset::new(features, label_matrix, feature_names, label_names)
}

fn binary_label(v: f64, name: &str, line: usize) -> Result<u8> {
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::Validation(format!(
            "label `{name}` has non-binary value {v} at line {line}"
        )))
    }
}

fn label_mask(attributes: &[Attribute], labels: &LabelSpec) -> Result<Vec<bool>> {
    let width = attributes.len();
    let mut mask = vec![false; width];
    match labels {
        LabelSpec::Trailing(count) => {
            if *count == 0 || *count >= width {
                return Err(Error::Argument(format!(
                    "trailing label count {count} invalid for {width} attributes"
                )));
            }
            mask[width - count..].iter_mut().for_each(|m| *m = true);
        }
        LabelSpec::Names(names) => {
            if names.is_empty() {
                return Err(Error::Argument("empty label list".into()));
            }
            for name in names {
                let idx = attributes
                    .iter()
                    .position(|a| &a.name == name)
                    .ok_or_else(|| Error::MissingLabel(name.clone()))?;
                if mask[idx] {
                    return Err(Error::Validation(format!(
                        "label `{name}` listed more than once"
                    )));
                }
                mask[idx] = true;
            }
            if mask.iter().all(|&m| m) {
                return Err(Error::Validation(
                    "every attribute is a label; no features remain".into(),
                ));
            }
        }
        LabelSpec::File(path) => {
            return Err(Error::Argument(format!(
                "label file {} must be resolved before parsing",
                path.display()
            )))
        }
    }
    Ok(mask)
}

fn split_keyword(line: &str) -> (&str, &str) {
    match line.find(char::is_whitespace) {
        Some(pos) => (&line[..pos], line[pos..].trim_start()),
        None => (line, ""),
    }
}

/// Reads a possibly quoted token, returning it and the remainder.
fn take_token(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let first = s.chars().next()?;
    if first == '\'' || first == '"' {
        let mut out = String::new();
        let mut chars = s.char_indices().skip(1);
        while let Some((i, c)) = chars.next() {
            if c == '\\' {
                if let Some((_, escaped)) = chars.next() {
                    out.push(escaped);
                }
            } else if c == first {
                return Some((out, &s[i + 1..]));
            } else {
                out.push(c);
            }
        }
        None
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        Some((s[..end].to_string(), &s[end..]))
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2
        && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"')))
    {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let (name, type_part) =
        take_token(rest).ok_or_else(|| Error::parse(line, "malformed @attribute declaration"))?;
    let type_part = type_part.trim();
    if type_part.is_empty() {
        return Err(Error::parse(line, format!("attribute `{name}` has no type")));
    }
    let kind = if let Some(body) = type_part.strip_prefix('{') {
        let body = body
            .strip_suffix('}')
            .ok_or_else(|| Error::parse(line, "unterminated nominal value list"))?;
        let values: Vec<String> = body
            .split(',')
            .map(|v| unquote(v).to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::parse(line, format!("attribute `{name}` has no values")));
        }
        AttrKind::Nominal(values)
    } else {
        let (ty, _) = split_keyword(type_part);
        match ty.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => AttrKind::Numeric,
            "string" | "date" | "relational" => {
                return Err(Error::parse(
                    line,
                    format!("attribute `{name}` has unsupported type `{ty}`"),
                ))
            }
            other => {
                return Err(Error::parse(
                    line,
                    format!("attribute `{name}` has unknown type `{other}`"),
                ))
            }
        }
    };
    Ok(Attribute { name, kind, line })
}

fn parse_value(raw: &str, attr: &Attribute, line: usize) -> Result<f64> {
    let raw = unquote(raw);
    if raw == "?" {
        return Err(Error::Validation(format!(
            "missing value for `{}` at line {line}",
            attr.name
        )));
    }
    match &attr.kind {
        AttrKind::Numeric => raw.parse::<f64>().map_err(|_| {
            Error::parse(line, format!("`{raw}` is not numeric (attribute `{}`)", attr.name))
        }),
        AttrKind::Nominal(values) => {
            if !values.iter().any(|v| v == raw) {
                return Err(Error::Validation(format!(
                    "`{raw}` is not a declared value of `{}` at line {line}",
                    attr.name
                )));
            }
            raw.parse::<f64>().map_err(|_| {
                Error::Validation(format!(
                    "categorical value `{raw}` of `{}` at line {line} is not supported",
                    attr.name
                ))
            })
        }
    }
}

/// Value of an attribute omitted from a sparse row: 0 for numerics, the
/// first declared value for nominals.
fn sparse_default(attr: &Attribute, line: usize) -> Result<f64> {
    match &attr.kind {
        AttrKind::Numeric => Ok(0.0),
        AttrKind::Nominal(values) => parse_value(&values[0], attr, line),
    }
}

fn parse_dense_row(line: &str, attributes: &[Attribute], line_no: usize) -> Result<Vec<f64>> {
    let cells: Vec<&str> = line.split(',').collect();
    if cells.len() != attributes.len() {
        return Err(Error::parse(
            line_no,
            format!(
                "row has {} values, header declares {} attributes",
                cells.len(),
                attributes.len()
            ),
        ));
    }
    cells
        .iter()
        .zip(attributes)
        .map(|(c, a)| parse_value(c, a, line_no))
        .collect()
}

fn parse_sparse_row(line: &str, attributes: &[Attribute], line_no: usize) -> Result<Vec<f64>> {
    let body = line
        .strip_prefix('{')
        .and_then(|l| l.strip_suffix('}'))
        .ok_or_else(|| Error::parse(line_no, "unterminated sparse row"))?;
    let mut values = attributes
        .iter()
        .map(|a| sparse_default(a, line_no))
        .collect::<Result<Vec<f64>>>()?;
    for entry in body.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (idx, val) = split_keyword(entry);
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad sparse index `{idx}`")))?;
        let attr = attributes.get(idx).ok_or_else(|| {
            Error::parse(
                line_no,
                format!("sparse index {idx} beyond {} attributes", attributes.len()),
            )
        })?;
        if val.is_empty() {
            return Err(Error::parse(line_no, format!("sparse index {idx} has no value")));
        }
        values[idx] = parse_value(val, attr, line_no)?;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const DENSE: &str = "% comment\n@RELATION toy\n\n@attribute a numeric\n@Attribute 'b c' REAL\n@attribute y {0,1}\n@DATA\n1.5,2,1\n-3,0.25,0\n0,0,1\n";

    #[test]
    fn three_line_dense_trailing_label() {
        let ds = parse_arff(DENSE, &LabelSpec::Trailing(1)).unwrap();
        assert_eq!(ds.features(), &array![[1.5, 2.0], [-3.0, 0.25], [0.0, 0.0]]);
        assert_eq!(ds.labels(), &array![[1u8], [0], [1]]);
        assert_eq!(ds.feature_names(), &["a".to_string(), "b c".to_string()]);
        assert_eq!(ds.label_names(), &["y".to_string()]);
    }

    #[test]
    fn labels_by_name_keep_attribute_order() {
        let text = "@relation r\n@attribute l1 {0,1}\n@attribute x numeric\n@attribute l2 numeric\n@data\n1,0.5,0\n0,1.5,1\n";
        let ds = parse_arff(text, &LabelSpec::Names(vec!["l2".into(), "l1".into()])).unwrap();
        assert_eq!(ds.label_names(), &["l1".to_string(), "l2".to_string()]);
        assert_eq!(ds.labels(), &array![[1u8, 0], [0, 1]]);
        assert_eq!(ds.features(), &array![[0.5], [1.5]]);
    }

    #[test]
    fn sparse_rows_default_to_zero() {
        let text = "@relation r\n@attribute x0 numeric\n@attribute x1 numeric\n@attribute x2 numeric\n@attribute y0 {0,1}\n@attribute y1 {0,1}\n@data\n{0 2.5,4 1}\n{}\n{1 -1, 2 3, 3 1, 4 1}\n";
        let ds = parse_arff(text, &LabelSpec::Trailing(2)).unwrap();
        assert_eq!(
            ds.features(),
            &array![[2.5, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, -1.0, 3.0]]
        );
        assert_eq!(ds.labels(), &array![[0u8, 1], [0, 0], [1, 1]]);
    }

    #[test]
    fn missing_label_name() {
        let err = parse_arff(DENSE, &LabelSpec::Names(vec!["nope".into()])).unwrap_err();
        assert!(matches!(err, Error::MissingLabel(n) if n == "nope"));
    }

    #[test]
    fn non_binary_label_value() {
        let text = "@relation r\n@attribute x numeric\n@attribute y numeric\n@data\n1,0\n2,3\n";
        let err = parse_arff(text, &LabelSpec::Trailing(1)).unwrap_err();
        assert!(matches!(err, Error::Validation(m) if m.contains("line 6")));
    }

    #[test]
    fn malformed_header_reports_line() {
        let text = "@relation r\n@attribute x numeric\n@attribute y\n@data\n1,0\n";
        match parse_arff(text, &LabelSpec::Trailing(1)).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "@relation r\n@attribute x numeric\nbogus line\n@data\n";
        assert!(matches!(
            parse_arff(text, &LabelSpec::Trailing(1)),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn string_attributes_rejected() {
        let text = "@relation r\n@attribute s string\n@attribute y {0,1}\n@data\nabc,1\n";
        assert!(matches!(
            parse_arff(text, &LabelSpec::Trailing(1)),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ragged_dense_row() {
        let text = "@relation r\n@attribute x numeric\n@attribute y {0,1}\n@data\n1,0\n1\n";
        assert!(matches!(
            parse_arff(text, &LabelSpec::Trailing(1)),
            Err(Error::Parse { line: 6, .. })
        ));
    }

    #[test]
    fn label_list_plain_and_xml() {
        assert_eq!(parse_label_list("a\n\n b \n#c\n"), vec!["a", "b"]);
        let xml = r#"<?xml version="1.0" encoding="utf-8"?>
<labels xmlns="http://mulan.sourceforge.net/labels">
<label name="Class1"></label>
<label name='Beach &amp; Sea'/>
</labels>"#;
        assert_eq!(parse_label_list(xml), vec!["Class1", "Beach & Sea"]);
    }

    #[test]
    fn label_spec_parse() {
        assert_eq!(LabelSpec::parse("14"), LabelSpec::Trailing(14));
        assert_eq!(
            LabelSpec::parse("yeast.xml"),
            LabelSpec::File(PathBuf::from("yeast.xml"))
        );
    }
}
