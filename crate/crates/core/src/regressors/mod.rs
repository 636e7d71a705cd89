//! Students: ordinary least squares, k-nearest neighbours and a small
//! fully-connected network.

mod knn;
mod linear;
mod mlp;

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::Predictor;

pub use knn::{fit_knn, KnnModel};
pub use linear::{fit_linear, LinearModel};
pub use mlp::{fit_mlp, Mlp, MlpConfig, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Knn,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Linear(LinearModel),
    Knn(KnnModel),
    Mlp(Mlp),
}

/// Mean training loss over the epoch's minibatches and the validation MSE
/// after the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub training_log: Vec<EpochLog>,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Linear(_) => ModelKind::Linear,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// `epoch,train_loss,val_loss` rows.
    pub fn training_log_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.training_log {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
        out
    }
}

impl Predictor for TrainedModel {
    fn predict(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let xs = x.to_owned().insert_axis(ndarray::Axis(0));
        self.predict_batch(&xs).row(0).to_owned()
    }

    fn predict_batch(&self, xs: &Array2<f64>) -> Array2<f64> {
        match &self.params {
            ModelParams::Linear(m) => m.predict_batch(xs),
            ModelParams::Knn(m) => m.predict_batch(xs),
            ModelParams::Mlp(m) => m.forward(xs),
        }
    }
}
