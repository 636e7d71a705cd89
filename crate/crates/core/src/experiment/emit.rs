use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::Metric;
use super::run::{CurvePoint, ExperimentCurve};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

const HEADER: [&str; 5] = ["metric", "n_train", "median", "q25", "q75"];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    metric: Metric,
    n_train: usize,
    median: f64,
    q25: f64,
    q75: f64,
}

fn rows(curves: &[ExperimentCurve]) -> Vec<Row> {
    let mut rows: Vec<Row> = curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|p| Row {
                metric: c.metric,
                n_train: p.n_train,
                median: p.median,
                q25: p.q25,
                q75: p.q75,
            })
        })
        .collect();
    rows.sort_by(|a, b| (a.metric.name(), a.n_train).cmp(&(b.metric.name(), b.n_train)));
    rows
}

/// One row per (metric, n_train), sorted on that pair. Floats are written
/// in shortest round-trip form, so output is byte-stable and lossless.
pub fn render(curves: &[ExperimentCurve], format: Format) -> Result<String> {
    let rows = rows(curves);
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Config(format!("csv encoding: {e}"));
            w.write_record(HEADER).map_err(csv_err)?;
            for row in &rows {
                w.serialize(row).map_err(csv_err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::Config(format!("csv encoding: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => Ok(serde_json::to_string_pretty(&rows)? + "\n"),
    }
}

pub fn emit(curves: &[ExperimentCurve], path: &Path, format: Format) -> Result<()> {
    let text = render(curves, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Inverse of [`render`]: rows are regrouped into one curve per metric.
pub fn parse_curves(text: &str, format: Format) -> Result<Vec<ExperimentCurve>> {
    let rows: Vec<Row> = match format {
        Format::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("curve csv: {e}")))?,
        Format::Json => serde_json::from_str(text)?,
    };
    let mut curves: Vec<ExperimentCurve> = Vec::new();
    for row in rows {
        let point = CurvePoint {
            n_train: row.n_train,
            median: row.median,
            q25: row.q25,
            q75: row.q75,
        };
        match curves.last_mut() {
            Some(c) if c.metric == row.metric => c.points.push(point),
            _ => curves.push(ExperimentCurve {
                metric: row.metric,
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}
