//! Plain-text dataset format.
//!
//! One point per row, coordinates separated by whitespace and/or commas, with
//! an optional trailing non-negative integer label (0 = outlier). Empty lines
//! and lines starting with `#` are ignored. Either every row carries a label
//! or none does.
//!
//! Coordinates are written in Rust's shortest round-trip form, so
//! `parse_dataset(&format_dataset(d), d.kind())` reproduces `d` bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{DataPoint, Dataset, ModelKind};

pub fn parse_dataset(text: &str, kind: ModelKind) -> Result<Dataset> {
    let dim = kind.point_dim();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut labelled: Option<bool> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let has_label = match fields.len() {
            n if n == dim => false,
            n if n == dim + 1 => true,
            got => return Err(Error::DimensionMismatch { expected: dim, got }),
        };
        match labelled {
            None => labelled = Some(has_label),
            Some(prev) if prev != has_label => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "label column present on some rows only".into(),
                })
            }
            Some(_) => {}
        }
        let coords = fields[..dim]
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    line: line_no,
                    msg: format!("`{f}` is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        if has_label {
            let f = fields[dim];
            let label = f.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("label `{f}` is not a non-negative integer"),
            })?;
            labels.push(label);
        }
        points.push(DataPoint::new(coords));
    }
    let labels = (labelled == Some(true)).then_some(labels);
    Dataset::new(kind, points, labels)
}

pub fn load_dataset(path: impl AsRef<Path>, kind: ModelKind) -> Result<Dataset> {
    parse_dataset(&std::fs::read_to_string(path)?, kind)
}

pub fn format_dataset(dataset: &Dataset) -> String {
    let mut out = format!(
        "# {} dataset, {} points{}\n",
        dataset.kind(),
        dataset.len(),
        if dataset.gt_labels().is_some() {
            ", last column is the structure label (0 = outlier)"
        } else {
            ""
        }
    );
    for (j, p) in dataset.points().iter().enumerate() {
        for (c, v) in p.coords().iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            // Debug formatting is the shortest string that parses back to `v`.
            let _ = write!(out, "{v:?}");
        }
        if let Some(labels) = dataset.gt_labels() {
            let _ = write!(out, " {}", labels[j]);
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_dataset(dataset))?;
    Ok(())
}
