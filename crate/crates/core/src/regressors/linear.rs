use nalgebra::DMatrix;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::{ModelParams, TrainedModel};
use crate::datamodel::Dataset;
use crate::error::Result;

const RIDGE_JITTER: f64 = 1e-10;

/// `y = [x, 1] · coef`; `coef` is (p+1)×q with the intercept in the last row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Array2<f64>,
}

impl LinearModel {
    pub fn slopes(&self) -> ndarray::ArrayView2<'_, f64> {
        let p = self.coef.nrows() - 1;
        self.coef.slice(s![..p, ..])
    }

    pub fn intercept(&self) -> ndarray::ArrayView1<'_, f64> {
        self.coef.row(self.coef.nrows() - 1)
    }

    pub fn predict_batch(&self, xs: &Array2<f64>) -> Array2<f64> {
        xs.dot(&self.slopes()) + self.intercept()
    }
}

/// Ordinary least squares with intercept via the normal equations; a tiny
/// ridge on the diagonal keeps rank-deficient designs solvable.
pub fn fit_linear(train: &Dataset) -> Result<TrainedModel> {
    let (n, p, q) = (train.n(), train.p(), train.q());
    let design = DMatrix::from_fn(
        n,
        p + 1,
        |i, j| if j < p { train.xs()[[i, j]] } else { 1.0 },
    );
    let targets = DMatrix::from_fn(n, q, |i, j| train.ys()[[i, j]]);
    let mut gram = design.transpose() * &design;
    for d in 0..=p {
        gram[(d, d)] += RIDGE_JITTER;
    }
    let rhs = design.transpose() * targets;
    let sol = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .expect("jittered gram matrix is non-singular"),
    };
    let coef = Array2::from_shape_fn((p + 1, q), |(i, j)| sol[(i, j)]);
    Ok(TrainedModel {
        params: ModelParams::Linear(LinearModel { coef }),
        training_log: Vec::new(),
    })
}
