use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mi::{threshold, ScheduleParams};
use crate::regressors::{MlpConfig, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SyntheticFavorable,
    SyntheticUnfavorable,
    RealCcpp,
    McTheorem2,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::SyntheticFavorable,
        Scenario::SyntheticUnfavorable,
        Scenario::RealCcpp,
        Scenario::McTheorem2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SyntheticFavorable => "synthetic-favorable",
            Scenario::SyntheticUnfavorable => "synthetic-unfavorable",
            Scenario::RealCcpp => "real-ccpp",
            Scenario::McTheorem2 => "mc-theorem2",
        }
    }

    /// Whether the true regression function is known, so the oracle metric exists.
    pub fn has_oracle(self) -> bool {
        self != Scenario::RealCcpp
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Per-cell quantities that can be aggregated into curves.
///
/// Variants are declared in name order so the derived ordering matches the
/// emitted row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Decision,
    Mi,
    Mse,
    Oracle,
    Rmse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Decision => "decision",
            Metric::Mi => "mi",
            Metric::Mse => "mse",
            Metric::Oracle => "oracle",
            Metric::Rmse => "rmse",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "decision" => Ok(Metric::Decision),
            "mi" => Ok(Metric::Mi),
            "mse" => Ok(Metric::Mse),
            "oracle" => Ok(Metric::Oracle),
            "rmse" => Ok(Metric::Rmse),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// `points` integers spaced evenly in log scale between `lo` and `hi`,
/// rounded to the nearest 10 (values below 10 are kept as is).
pub fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    assert!(points >= 2 && lo >= 1 && hi > lo);
    let ratio = (hi as f64 / lo as f64).ln() / (points - 1) as f64;
    let mut grid: Vec<usize> = (0..points)
        .map(|i| {
            let v = lo as f64 * (ratio * i as f64).exp();
            if v < 10.0 {
                v.round() as usize
            } else {
                ((v / 10.0).round() * 10.0) as usize
            }
        })
        .collect();
    grid[0] = lo;
    grid[points - 1] = hi;
    grid.dedup();
    grid
}

/// Everything needed to reproduce one sweep. Serializes to a flat
/// `key = value` text file where every field has its own key.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Training sizes; for `mc-theorem2` these are the validation sizes `m`.
    pub n_train_grid: Vec<usize>,
    pub n_val: usize,
    pub seeds: Vec<u64>,
    pub schedule: ScheduleParams,
    pub mlp: MlpConfig,
    pub data_path: Option<PathBuf>,
    pub metric_set: Vec<Metric>,
    /// Response column of the real-data file.
    pub target_column: String,
    /// Principal components kept in the real-data pipeline.
    pub pca_components: usize,
    /// Tolerance of the oracle teacher.
    pub oracle_tol: f64,
    pub cache_dir: Option<PathBuf>,
    pub execution: Execution,
}

const KEYS: [&str; 24] = [
    "scenario",
    "n_train_grid",
    "n_val",
    "seeds",
    "metric_set",
    "data_path",
    "target_column",
    "pca_components",
    "oracle_tol",
    "cache_dir",
    "execution",
    "schedule.ell",
    "schedule.lambda",
    "schedule.b_scale",
    "schedule.a_scale",
    "schedule.a_exp",
    "mlp.hidden_layers",
    "mlp.optimizer",
    "mlp.learning_rate",
    "mlp.batch_size",
    "mlp.max_epochs",
    "mlp.early_stop_tol",
    "mlp.patience",
    "mlp.seed",
];

impl ExperimentConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let base = ExperimentConfig {
            scenario,
            n_train_grid: log_grid(100, 50_000, 10),
            n_val: 2000,
            seeds: (0..20).collect(),
            schedule: ScheduleParams::default(),
            mlp: MlpConfig::favorable(0),
            data_path: None,
            metric_set: vec![Metric::Mi, Metric::Mse, Metric::Oracle, Metric::Decision],
            target_column: "PE".into(),
            pca_components: 2,
            oracle_tol: 1e-3,
            cache_dir: None,
            execution: Execution::default(),
        };
        match scenario {
            Scenario::SyntheticFavorable => base,
            Scenario::SyntheticUnfavorable => ExperimentConfig {
                mlp: MlpConfig::unfavorable(0),
                ..base
            },
            Scenario::RealCcpp => ExperimentConfig {
                n_train_grid: log_grid(100, 7000, 10),
                mlp: MlpConfig::ccpp(0),
                metric_set: vec![Metric::Mi, Metric::Rmse, Metric::Decision],
                ..base
            },
            Scenario::McTheorem2 => ExperimentConfig {
                n_train_grid: vec![500, 2000, 8000, 20_000],
                seeds: (0..50).collect(),
                metric_set: vec![Metric::Mi, Metric::Decision],
                ..base
            },
        }
    }

    /// Parses a flat `key = value` file on top of the scenario defaults.
    /// `#` starts a comment. The scenario comes from `scenario` in the file
    /// or from the `scenario` argument; if both are given they must agree.
    pub fn parse(text: &str, scenario: Option<Scenario>) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    i + 1
                )));
            }
            pairs.push((key, value.trim()));
        }
        let in_file = pairs
            .iter()
            .find(|(k, _)| *k == "scenario")
            .map(|(_, v)| v.parse::<Scenario>())
            .transpose()?;
        let scenario = match (scenario, in_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "scenario `{a}` conflicts with `{b}` in the config file"
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("no scenario given".into())),
        };
        let mut cfg = Self::defaults(scenario);
        for (key, value) in pairs {
            if key != "scenario" {
                cfg.set(key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "scenario" => self.scenario = value.parse()?,
            "n_train_grid" => self.n_train_grid = parse_list(key, value)?,
            "n_val" => self.n_val = parse_value(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "metric_set" => {
                self.metric_set = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<Metric>>>()?
            }
            "data_path" => self.data_path = optional_path(value),
            "target_column" => self.target_column = value.to_string(),
            "pca_components" => self.pca_components = parse_value(key, value)?,
            "oracle_tol" => self.oracle_tol = parse_value(key, value)?,
            "cache_dir" => self.cache_dir = optional_path(value),
            "execution" => self.execution = value.parse()?,
            "schedule.ell" => self.schedule.partition.ell = parse_value(key, value)?,
            "schedule.lambda" => self.schedule.partition.lambda = parse_value(key, value)?,
            "schedule.b_scale" => self.schedule.partition.b_scale = parse_value(key, value)?,
            "schedule.a_scale" => self.schedule.a_scale = parse_value(key, value)?,
            "schedule.a_exp" => self.schedule.a_exp = parse_value(key, value)?,
            "mlp.hidden_layers" => self.mlp.hidden_layers = parse_list(key, value)?,
            "mlp.optimizer" => self.mlp.optimizer = value.parse()?,
            "mlp.learning_rate" => self.mlp.learning_rate = parse_value(key, value)?,
            "mlp.batch_size" => self.mlp.batch_size = parse_value(key, value)?,
            "mlp.max_epochs" => self.mlp.max_epochs = parse_value(key, value)?,
            "mlp.early_stop_tol" => self.mlp.early_stop_tol = parse_value(key, value)?,
            "mlp.patience" => self.mlp.patience = parse_value(key, value)?,
            "mlp.seed" => self.mlp.seed = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Renders every field; `parse(to_kv())` reproduces the config.
    pub fn to_kv(&self) -> String {
        KEYS.iter()
            .map(|key| format!("{key} = {}\n", self.get(key)))
            .collect()
    }

    fn get(&self, key: &str) -> String {
        let p = &self.schedule.partition;
        match key {
            "scenario" => self.scenario.to_string(),
            "n_train_grid" => join(&self.n_train_grid),
            "n_val" => self.n_val.to_string(),
            "seeds" => join(&self.seeds),
            "metric_set" => join(&self.metric_set),
            "data_path" => path_text(&self.data_path),
            "target_column" => self.target_column.clone(),
            "pca_components" => self.pca_components.to_string(),
            "oracle_tol" => self.oracle_tol.to_string(),
            "cache_dir" => path_text(&self.cache_dir),
            "execution" => self.execution.to_string(),
            "schedule.ell" => p.ell.to_string(),
            "schedule.lambda" => p.lambda.to_string(),
            "schedule.b_scale" => p.b_scale.to_string(),
            "schedule.a_scale" => self.schedule.a_scale.to_string(),
            "schedule.a_exp" => self.schedule.a_exp.to_string(),
            "mlp.hidden_layers" => join(&self.mlp.hidden_layers),
            "mlp.optimizer" => match self.mlp.optimizer {
                Optimizer::Adam => "adam".into(),
                Optimizer::Sgd => "sgd".into(),
            },
            "mlp.learning_rate" => self.mlp.learning_rate.to_string(),
            "mlp.batch_size" => self.mlp.batch_size.to_string(),
            "mlp.max_epochs" => self.mlp.max_epochs.to_string(),
            "mlp.early_stop_tol" => self.mlp.early_stop_tol.to_string(),
            "mlp.patience" => self.mlp.patience.to_string(),
            "mlp.seed" => self.mlp.seed.to_string(),
            _ => unreachable!("key list and getter out of sync"),
        }
    }

    /// CI profile: at most five seeds and four grid points, keeping both
    /// ends of the grid.
    pub fn fast(&mut self) {
        self.seeds.truncate(5);
        let n = self.n_train_grid.len();
        if n > 4 {
            self.n_train_grid = (0..4)
                .map(|i| self.n_train_grid[(i * (n - 1) + 1) / 3])
                .collect();
        }
    }

    /// Replaces the seed list with as many consecutive seeds starting at `base`.
    pub fn rebase_seeds(&mut self, base: u64) {
        let count = self.seeds.len() as u64;
        self.seeds = (base..base + count).collect();
    }

    /// Metrics actually evaluated: the real-data scenario reports RMSE in
    /// place of MSE and has no oracle.
    pub fn effective_metrics(&self) -> Vec<Metric> {
        let mut out: Vec<Metric> = self
            .metric_set
            .iter()
            .filter_map(|&m| match (self.scenario, m) {
                (Scenario::RealCcpp, Metric::Mse) => Some(Metric::Rmse),
                (sc, Metric::Oracle) if !sc.has_oracle() => None,
                _ => Some(m),
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// `a_m` at the validation size, the level the MI curve is compared to.
    pub fn validation_threshold(&self) -> f64 {
        threshold(self.n_val, &self.schedule)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = &self.n_train_grid;
        if grid.is_empty() {
            return Err(Error::Config("n_train_grid is empty".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "n_train_grid must be strictly increasing".into(),
            ));
        }
        if grid[0] < 2 {
            return Err(Error::Config("n_train_grid entries must be >= 2".into()));
        }
        if self.n_val < 2 {
            return Err(Error::Config("n_val must be >= 2".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds is empty".into()));
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds contain duplicates".into()));
        }
        if self.metric_set.is_empty() {
            return Err(Error::Config("metric_set is empty".into()));
        }
        if self.pca_components == 0 {
            return Err(Error::Config("pca_components must be >= 1".into()));
        }
        if !(self.oracle_tol.is_finite() && self.oracle_tol > 0.0) {
            return Err(Error::Config("oracle_tol must be > 0".into()));
        }
        if self.scenario == Scenario::RealCcpp && self.data_path.is_none() {
            return Err(Error::Config("real-ccpp needs data_path".into()));
        }
        self.schedule.validate()?;
        self.mlp.validate()
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_value(key, v)).collect()
}

/// Either a comma list or a half-open range `a..b`.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    match value.split_once("..") {
        Some((a, b)) => {
            let a: u64 = parse_value("seeds", a)?;
            let b: u64 = parse_value("seeds", b)?;
            Ok((a..b).collect())
        }
        None => parse_list("seeds", value),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn path_text(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}
