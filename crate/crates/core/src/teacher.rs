//! Assessment agents for a trained student and the Monte-Carlo harness
//! that measures the information teacher's error rates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::datamodel::{sample_additive, AdditiveModelSpec, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mi::{estimate_mi, residuals, threshold, ScheduleParams};
use crate::predictor::Predictor;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeacherKind {
    Oracle,
    Naive,
    Information,
}

/// A binary assessment: `decision == 1` means the student qualifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherVerdict {
    pub decision: u8,
    pub statistic: f64,
    pub threshold: f64,
    pub m: usize,
    pub kind: TeacherKind,
}

impl TeacherVerdict {
    fn new(kind: TeacherKind, statistic: f64, threshold: f64, m: usize) -> Self {
        TeacherVerdict {
            decision: Self::rule(kind, statistic, threshold) as u8,
            statistic,
            threshold,
            m,
            kind,
        }
    }

    /// Information and oracle teachers accept on `statistic < threshold`;
    /// the naive teacher accepts on `statistic <= threshold`.
    pub fn rule(kind: TeacherKind, statistic: f64, threshold: f64) -> bool {
        match kind {
            TeacherKind::Information | TeacherKind::Oracle => statistic < threshold,
            TeacherKind::Naive => statistic <= threshold,
        }
    }

    pub fn accepted(&self) -> bool {
        self.decision == 1
    }

    /// Decision recomputed from the reported statistic and threshold.
    pub fn recomputed(&self) -> u8 {
        Self::rule(self.kind, self.statistic, self.threshold) as u8
    }
}

/// Accepts when the estimated MI between inputs and residuals on `val` is
/// below `a_m`.
pub fn information_teacher(
    predict: &dyn Predictor,
    val: &Dataset,
    params: &ScheduleParams,
) -> Result<TeacherVerdict> {
    if val.n() < 2 {
        return Err(Error::Size(
            "information teacher needs at least two samples".into(),
        ));
    }
    let samples = residuals(val, predict)?;
    let est = estimate_mi(&samples, params)?;
    Ok(TeacherVerdict::new(
        TeacherKind::Information,
        est.value,
        threshold(val.n(), params),
        val.n(),
    ))
}

/// Mean squared distance between the true regression function and the
/// student over `xs`; accepts when it is below `tol`.
pub fn oracle_teacher(
    f_true: &dyn Predictor,
    predict: &dyn Predictor,
    xs: &Array2<f64>,
    tol: f64,
) -> Result<TeacherVerdict> {
    if xs.nrows() == 0 {
        return Err(Error::Size(
            "oracle teacher needs at least one input".into(),
        ));
    }
    let stat = mean_sq_norm(&(f_true.predict_batch(xs) - predict.predict_batch(xs)));
    Ok(TeacherVerdict::new(
        TeacherKind::Oracle,
        stat,
        tol,
        xs.nrows(),
    ))
}

/// Empirical validation MSE against the fixed rule `MSE <= a`.
pub fn naive_mse_teacher(predict: &dyn Predictor, val: &Dataset, a: f64) -> Result<TeacherVerdict> {
    let mse = validation_mse(predict, val);
    Ok(TeacherVerdict::new(TeacherKind::Naive, mse, a, val.n()))
}

/// Mean over rows of the squared residual norm.
pub fn validation_mse(predict: &dyn Predictor, val: &Dataset) -> f64 {
    mean_sq_norm(&(val.ys() - &predict.predict_batch(val.xs())))
}

fn mean_sq_norm(diff: &Array2<f64>) -> f64 {
    diff.iter().map(|d| d * d).sum::<f64>() / diff.nrows() as f64
}

/// Empirical type I / type II error rates of the information teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateCurve {
    pub m_grid: Vec<usize>,
    /// Fraction of trials rejecting the optimal student.
    pub alpha_hat: Vec<f64>,
    /// Fraction of trials accepting the suboptimal student.
    pub beta_hat: Vec<f64>,
    pub trials: usize,
    /// Per trial, the largest grid size at which the optimal student was
    /// rejected (a finite-grid stand-in for the last wrong time).
    pub last_wrong_null: Vec<Option<usize>>,
}

impl ErrorRateCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,alpha_hat,beta_hat,trials\n");
        for (i, m) in self.m_grid.iter().enumerate() {
            let _ = writeln!(
                out,
                "{m},{},{},{}",
                self.alpha_hat[i], self.beta_hat[i], self.trials
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// OLS slope of `ln(max(alpha_hat, 1/trials))` against `m^(1/3)`.
    pub fn null_decay_slope(&self) -> f64 {
        let floor = 1.0 / self.trials as f64;
        let xs: Vec<f64> = self.m_grid.iter().map(|&m| (m as f64).cbrt()).collect();
        let ys: Vec<f64> = self.alpha_hat.iter().map(|&a| a.max(floor).ln()).collect();
        ols_slope(&xs, &ys)
    }
}

pub(crate) fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Settings for [`monte_carlo_error_rates`].
#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub params: ScheduleParams,
    pub seed: u64,
    pub execution: Execution,
}

/// Runs `trials` fresh validation draws from `spec` at every grid size and
/// records how often the information teacher rejects `student_null` (which
/// must equal the spec's regression function) and accepts `student_alt`.
///
/// Each (m, trial) job draws its data from `derive_seed(seed, [m, trial])`,
/// so the curve does not depend on how jobs are scheduled.
pub fn monte_carlo_error_rates(
    spec: &AdditiveModelSpec,
    student_null: &dyn Predictor,
    student_alt: &dyn Predictor,
    cfg: &MonteCarloConfig,
) -> Result<ErrorRateCurve> {
    spec.validate()?;
    cfg.params.validate()?;
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if cfg.m_grid.is_empty() || cfg.m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "m_grid must be non-empty and strictly increasing".into(),
        ));
    }
    if cfg.m_grid[0] < 2 {
        return Err(Error::Config("grid sizes must be at least 2".into()));
    }
    check_null_student(spec, student_null, cfg.seed)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.m_grid.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let outcomes = cfg.execution.map(jobs, |(g, t)| -> Result<(bool, bool)> {
        let m = cfg.m_grid[g];
        let val = sample_additive(spec, m, derive_seed(cfg.seed, &[m as u64, t as u64]))?;
        let null = information_teacher(student_null, &val, &cfg.params)?;
        let alt = information_teacher(student_alt, &val, &cfg.params)?;
        Ok((!null.accepted(), alt.accepted()))
    });

    let mut alpha = vec![0usize; cfg.m_grid.len()];
    let mut beta = vec![0usize; cfg.m_grid.len()];
    let mut last_wrong = vec![None; cfg.trials];
    for (k, outcome) in outcomes.into_iter().enumerate() {
        let (g, t) = (k / cfg.trials, k % cfg.trials);
        let (null_wrong, alt_wrong) = outcome?;
        if null_wrong {
            alpha[g] += 1;
            last_wrong[t] = Some(cfg.m_grid[g]);
        }
        if alt_wrong {
            beta[g] += 1;
        }
    }
    let frac = |c: usize| c as f64 / cfg.trials as f64;
    Ok(ErrorRateCurve {
        m_grid: cfg.m_grid.clone(),
        alpha_hat: alpha.into_iter().map(frac).collect(),
        beta_hat: beta.into_iter().map(frac).collect(),
        trials: cfg.trials,
        last_wrong_null: last_wrong,
    })
}

/// The null student must reproduce the regression function; probe it on a
/// small draw from the input law.
fn check_null_student(spec: &AdditiveModelSpec, student: &dyn Predictor, seed: u64) -> Result<()> {
    let probe = sample_additive(spec, 64, derive_seed(seed, &[u64::MAX]))?;
    let preds = student.predict_batch(probe.xs());
    for i in 0..probe.n() {
        let want = spec.f(probe.x(i));
        if preds.ncols() != 1 || (preds[[i, 0]] - want).abs() > 1e-9 * (1.0 + want.abs()) {
            return Err(Error::Config(
                "null student does not match the model's regression function".into(),
            ));
        }
    }
    Ok(())
}
