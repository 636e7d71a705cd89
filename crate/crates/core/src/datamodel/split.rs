use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub seed: u64,
}

/// Disjoint train/validation subsets drawn by a seeded uniform permutation.
pub fn split(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    if spec.n_val == 0 {
        return Err(Error::Size("validation split must be non-empty".into()));
    }
    if spec.n_train == 0 {
        return Err(Error::Size("training split must be non-empty".into()));
    }
    if spec.n_train + spec.n_val > ds.n() {
        return Err(Error::Size(format!(
            "requested {} + {} rows but dataset has {}",
            spec.n_train,
            spec.n_val,
            ds.n()
        )));
    }
    let idx = permutation(ds.n(), spec.seed);
    let train = ds.select(&idx[..spec.n_train])?;
    let val = ds.select(&idx[spec.n_train..spec.n_train + spec.n_val])?;
    Ok((train, val))
}

pub(crate) fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    idx
}

/// Per-feature z-scoring with statistics from a reference (training) matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance columns keep scale 1 so they map to a constant 0.
    pub fn fit(xs: &Array2<f64>) -> Self {
        let n = xs.nrows() as f64;
        let mean = xs.mean_axis(Axis(0)).expect("non-empty matrix");
        let scale = xs
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &m)| {
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                let sd = var.sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer {
            mean: mean.to_vec(),
            scale,
        }
    }

    pub fn transform(&self, xs: &Array2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        let scale = Array1::from(self.scale.clone());
        (xs - &mean) / &scale
    }

    pub fn inverse_transform(&self, zs: &Array2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        let scale = Array1::from(self.scale.clone());
        zs * &scale + &mean
    }
}
