use ndarray::{Array, Array1, Array2, Axis, Dimension, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EpochLog, ModelParams, TrainedModel};
use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "adam" => Ok(Optimizer::Adam),
            "sgd" => Ok(Optimizer::Sgd),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Training settings. Hidden layers use the rectified-linear activation and
/// the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_tol: f64,
    pub patience: usize,
    pub seed: u64,
}

impl MlpConfig {
    /// Two hidden layers of 128 units trained with Adam.
    pub fn favorable(seed: u64) -> Self {
        MlpConfig {
            hidden_layers: vec![128, 128],
            optimizer: Optimizer::Adam,
            learning_rate: 1e-4,
            batch_size: 64,
            max_epochs: 50,
            early_stop_tol: 1e-4,
            patience: 5,
            seed,
        }
    }

    /// One hidden layer of 32 units trained with plain SGD.
    pub fn unfavorable(seed: u64) -> Self {
        MlpConfig {
            hidden_layers: vec![32],
            optimizer: Optimizer::Sgd,
            ..Self::favorable(seed)
        }
    }

    /// One hidden layer of 256 units, Adam, up to 300 epochs.
    pub fn ccpp(seed: u64) -> Self {
        MlpConfig {
            hidden_layers: vec![256],
            max_epochs: 300,
            ..Self::favorable(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs and patience must be >= 1".into(),
            ));
        }
        if !(self.early_stop_tol.is_finite() && self.early_stop_tol > 0.0) {
            return Err(Error::Config("early_stop_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Dense layer `a · w + b`; `w` is fan_in × fan_out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Parameter gradients, laid out like [`Mlp::layers`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-s..s)),
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, xs: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = xs.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.w) + &layer.b;
            if l < last {
                a.mapv_inplace(relu);
            }
        }
        a
    }

    /// Mean over rows of the squared error norm.
    pub fn loss(&self, xs: &Array2<f64>, ys: &Array2<f64>) -> f64 {
        let diff = self.forward(xs) - ys;
        diff.iter().map(|d| d * d).sum::<f64>() / xs.nrows() as f64
    }

    /// Loss and its gradient by backpropagation.
    pub fn loss_and_gradient(&self, xs: &Array2<f64>, ys: &Array2<f64>) -> (f64, Gradients) {
        let n = xs.nrows() as f64;
        let last = self.layers.len() - 1;
        // activations[l] is the input to layer l
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(xs.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = activations[l].dot(&layer.w) + &layer.b;
            if l < last {
                z.mapv_inplace(relu);
            }
            activations.push(z);
        }
        let diff = &activations[last + 1] - ys;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;

        let mut delta = diff * (2.0 / n);
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = &activations[l];
            let gw = input.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].w.t());
                // input to layer l is relu(z); its derivative is 1 where the
                // activation is positive
                ndarray::Zip::from(&mut back).and(input).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense { w: gw, b: gb });
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flattened parameters (weights then bias, layer by layer).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for l in &mut self.layers {
            l.w.iter_mut()
                .for_each(|v| *v = *it.next().expect("enough parameters"));
            l.b.iter_mut()
                .for_each(|v| *v = *it.next().expect("enough parameters"));
        }
    }
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        Mlp {
            layers: self.layers.clone(),
        }
        .flat_params()
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct AdamState {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl AdamState {
    fn new(net: &Mlp) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| Dense {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                })
                .collect::<Vec<_>>()
        };
        AdamState {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let step = lr * c2.sqrt() / c1;
        let eps = ADAM_EPS * c2.sqrt();
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            adam_update(&mut layer.w, &g.w, &mut m.w, &mut v.w, step, eps);
            adam_update(&mut layer.b, &g.b, &mut m.b, &mut v.b, step, eps);
        }
    }
}

/// Bias correction folded into `step` and `eps`.
fn adam_update<D: Dimension>(
    p: &mut Array<f64, D>,
    g: &Array<f64, D>,
    m: &mut Array<f64, D>,
    v: &mut Array<f64, D>,
    step: f64,
    eps: f64,
) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *p -= step * *m / (v.sqrt() + eps);
    });
}

fn sgd_step(net: &mut Mlp, grads: &Gradients, lr: f64) {
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        layer.w.scaled_add(-lr, &g.w);
        layer.b.scaled_add(-lr, &g.b);
    }
}

/// Minibatch training on squared loss with early stopping on `val`.
///
/// After every epoch the validation MSE is logged; when it has not improved
/// on the best value by more than `early_stop_tol` for `patience`
/// consecutive epochs, training stops. The returned weights are those of the
/// epoch with the lowest validation loss.
pub fn fit_mlp(train: &Dataset, val: &Dataset, cfg: &MlpConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if train.p() != val.p() || train.q() != val.q() {
        return Err(Error::Dimension(
            "training and validation sets have different shapes".into(),
        ));
    }
    let mut sizes = vec![train.p()];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(train.q());
    let mut net = Mlp::init(&sizes, &mut seeded(cfg.seed));
    let mut adam = AdamState::new(&net);

    let n = train.n();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, net.clone());
    let mut reference = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut seeded(derive_seed(cfg.seed, &[epoch as u64])));
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = train.xs().select(Axis(0), chunk);
            let yb = train.ys().select(Axis(0), chunk);
            let (loss, grads) = net.loss_and_gradient(&xb, &yb);
            if !loss.is_finite() {
                return Err(Error::Training { epoch, loss });
            }
            match cfg.optimizer {
                Optimizer::Adam => adam.step(&mut net, &grads, cfg.learning_rate),
                Optimizer::Sgd => sgd_step(&mut net, &grads, cfg.learning_rate),
            }
            loss_sum += loss;
            batches += 1;
        }
        let val_loss = net.loss(val.xs(), val.ys());
        if !val_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                loss: val_loss,
            });
        }
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, net.clone());
        }
        if val_loss < reference - cfg.early_stop_tol {
            reference = val_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainedModel {
        params: ModelParams::Mlp(best.1),
        training_log: log,
    })
}
