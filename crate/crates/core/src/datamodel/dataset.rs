use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired samples: `xs` is n×p inputs, `ys` is n×q outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Array2<f64>,
    ys: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct ColumnarJson {
    p: usize,
    q: usize,
    xs: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(xs: Array2<f64>, ys: Array2<f64>) -> Result<Self> {
        if xs.nrows() != ys.nrows() {
            return Err(Error::Dimension(format!(
                "xs has {} rows but ys has {}",
                xs.nrows(),
                ys.nrows()
            )));
        }
        if xs.nrows() == 0 {
            return Err(Error::Size("dataset must have at least one row".into()));
        }
        if xs.ncols() == 0 || ys.ncols() == 0 {
            return Err(Error::Dimension("p and q must be at least 1".into()));
        }
        for (name, m) in [("xs", &xs), ("ys", &ys)] {
            if let Some(((i, j), v)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name}[{i}, {j}] = {v} is not finite"
                )));
            }
        }
        Ok(Dataset { xs, ys })
    }

    pub fn xs(&self) -> &Array2<f64> {
        &self.xs
    }

    pub fn ys(&self) -> &Array2<f64> {
        &self.ys
    }

    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    pub fn p(&self) -> usize {
        self.xs.ncols()
    }

    pub fn q(&self) -> usize {
        self.ys.ncols()
    }

    pub fn x(&self, i: usize) -> ArrayView1<'_, f64> {
        self.xs.row(i)
    }

    pub fn y(&self, i: usize) -> ArrayView1<'_, f64> {
        self.ys.row(i)
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Dataset::new(
            self.xs.select(ndarray::Axis(0), idx),
            self.ys.select(ndarray::Axis(0), idx),
        )
    }

    /// Same outputs, new inputs (e.g. after standardization or PCA).
    pub fn with_inputs(&self, xs: Array2<f64>) -> Result<Self> {
        Dataset::new(xs, self.ys.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ColumnarJson {
            p: self.p(),
            q: self.q(),
            xs: self.xs.rows().into_iter().map(|r| r.to_vec()).collect(),
            ys: self.ys.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ColumnarJson = serde_json::from_str(text)?;
        let xs = rows_to_array(&doc.xs, doc.p, "xs")?;
        let ys = rows_to_array(&doc.ys, doc.q, "ys")?;
        Dataset::new(xs, ys)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_json(&text)
    }
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>], width: usize, what: &str) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Dimension(format!(
                "{what} row {i} has {} entries, expected {width}",
                r.len()
            )));
        }
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::Dimension(e.to_string()))
}
