use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{ModelParams, TrainedModel};
use crate::datamodel::Dataset;
use crate::error::{Error, Result};

/// Brute-force Euclidean k-nearest-neighbour regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub xs: Array2<f64>,
    pub ys: Array2<f64>,
}

impl KnnModel {
    /// Mean output of the k closest training rows; equal distances are
    /// broken by training-row index.
    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = self
            .xs
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row.iter().zip(x.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                (d, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let q = self.ys.ncols();
        let mut out = vec![0.0; q];
        for &(_, i) in &dist[..self.k] {
            for (o, y) in out.iter_mut().zip(self.ys.row(i)) {
                *o += y;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.k as f64);
        out
    }

    pub fn predict_batch(&self, xs: &Array2<f64>) -> Array2<f64> {
        let q = self.ys.ncols();
        let mut out = Array2::zeros((xs.nrows(), q));
        for (i, row) in xs.rows().into_iter().enumerate() {
            for (j, v) in self.predict_one(row).into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        out
    }
}

pub fn fit_knn(train: &Dataset, k: usize) -> Result<TrainedModel> {
    if k == 0 || k > train.n() {
        return Err(Error::Config(format!(
            "k = {k} must lie in 1..={}",
            train.n()
        )));
    }
    Ok(TrainedModel {
        params: ModelParams::Knn(KnnModel {
            k,
            xs: train.xs().clone(),
            ys: train.ys().clone(),
        }),
        training_log: Vec::new(),
    })
}
