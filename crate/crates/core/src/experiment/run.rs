use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Metric, Scenario};
use crate::datamodel::{
    load_csv, sample_additive, split, AdditiveModelSpec, Dataset, PcaModel, SplitSpec, Standardizer,
};
use crate::error::{Error, Result};
use crate::predictor::{scalar, Predictor};
use crate::regressors::{fit_mlp, MlpConfig, TrainedModel};
use crate::rng::derive_seed;
use crate::teacher::{information_teacher, oracle_teacher, validation_mse};

const TRAIN_STREAM: u64 = 1;
const VAL_STREAM: u64 = 2;
const MC_STREAM: u64 = 3;

/// Standardize inputs, optionally project onto principal components, and
/// train on standardized targets. Predictions are returned on the original
/// target scale.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub scaler: Standardizer,
    pub pca: Option<PcaModel>,
    pub target: Standardizer,
    pub model: TrainedModel,
}

/// The trained network seen from feature space, with targets mapped back.
pub struct Head<'a>(&'a Pipeline);

impl Pipeline {
    /// All statistics come from `train`; `val` drives early stopping.
    pub fn fit(
        train: &Dataset,
        val: &Dataset,
        pca_components: Option<usize>,
        mlp: &MlpConfig,
    ) -> Result<Self> {
        let scaler = Standardizer::fit(train.xs());
        let pca = pca_components
            .map(|k| PcaModel::fit(&scaler.transform(train.xs()), k))
            .transpose()?;
        let target = Standardizer::fit(train.ys());
        let t_train = Dataset::new(
            project(&scaler, &pca, train.xs())?,
            target.transform(train.ys()),
        )?;
        let t_val = Dataset::new(
            project(&scaler, &pca, val.xs())?,
            target.transform(val.ys()),
        )?;
        let model = fit_mlp(&t_train, &t_val, mlp)?;
        Ok(Pipeline {
            scaler,
            pca,
            target,
            model,
        })
    }

    pub fn features(&self, xs: &Array2<f64>) -> Result<Array2<f64>> {
        project(&self.scaler, &self.pca, xs)
    }

    pub fn head(&self) -> Head<'_> {
        Head(self)
    }
}

fn project(scaler: &Standardizer, pca: &Option<PcaModel>, xs: &Array2<f64>) -> Result<Array2<f64>> {
    let z = scaler.transform(xs);
    match pca {
        Some(pca) => pca.transform(&z),
        None => Ok(z),
    }
}

impl Predictor for Head<'_> {
    fn predict(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let row = x.to_owned().insert_axis(ndarray::Axis(0));
        self.predict_batch(&row).row(0).to_owned()
    }

    fn predict_batch(&self, xs: &Array2<f64>) -> Array2<f64> {
        self.0
            .target
            .inverse_transform(&self.0.model.predict_batch(xs))
    }
}

impl Predictor for Pipeline {
    fn predict(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let row = x.to_owned().insert_axis(ndarray::Axis(0));
        self.predict_batch(&row).row(0).to_owned()
    }

    fn predict_batch(&self, xs: &Array2<f64>) -> Array2<f64> {
        let features = self.features(xs).expect("input width fixed at fit time");
        self.head().predict_batch(&features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CellOutcome {
    Done {
        metrics: BTreeMap<Metric, f64>,
        epochs: usize,
    },
    Diverged {
        epoch: usize,
    },
}

/// Result of one (training size, seed) job. `fingerprint` captures every
/// setting that influences the cell, so a stale cache entry is never reused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub scenario: Scenario,
    pub n_train: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_train: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCurve {
    pub metric: Metric,
    pub points: Vec<CurvePoint>,
}

impl ExperimentCurve {
    pub fn at(&self, n_train: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.n_train == n_train)
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub curves: Vec<ExperimentCurve>,
    /// Cells in (n_train, seed) order.
    pub cells: Vec<CellRecord>,
    /// Cells whose training diverged; excluded from `curves`.
    pub diverged: usize,
    pub cache_hits: usize,
}

impl ExperimentOutput {
    pub fn curve(&self, metric: Metric) -> Option<&ExperimentCurve> {
        self.curves.iter().find(|c| c.metric == metric)
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    metrics: Vec<Metric>,
    spec: AdditiveModelSpec,
    data: Option<Dataset>,
    fingerprint: String,
}

#[derive(Serialize)]
struct Fingerprint<'a> {
    n_val: usize,
    schedule: &'a crate::mi::ScheduleParams,
    mlp: &'a MlpConfig,
    data_path: &'a Option<PathBuf>,
    target_column: &'a str,
    pca_components: usize,
    oracle_tol: f64,
    metrics: &'a [Metric],
}

/// Runs every (training size, seed) cell and aggregates each metric into a
/// median/IQR curve over seeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let metrics = cfg.effective_metrics();
    let data = match cfg.scenario {
        Scenario::RealCcpp => {
            let path = cfg.data_path.as_deref().expect("validated");
            let ds = load_csv(path, &[cfg.target_column.as_str()])?;
            let largest = *cfg.n_train_grid.last().expect("validated");
            if largest + cfg.n_val > ds.n() {
                return Err(Error::Size(format!(
                    "{} has {} rows, need {} for training plus {} for validation",
                    path.display(),
                    ds.n(),
                    largest,
                    cfg.n_val
                )));
            }
            if cfg.pca_components > ds.p() {
                return Err(Error::Config(format!(
                    "pca_components {} exceeds {} input columns",
                    cfg.pca_components,
                    ds.p()
                )));
            }
            Some(ds)
        }
        _ => None,
    };
    let fingerprint = serde_json::to_string(&Fingerprint {
        n_val: cfg.n_val,
        schedule: &cfg.schedule,
        mlp: &cfg.mlp,
        data_path: &cfg.data_path,
        target_column: &cfg.target_column,
        pca_components: cfg.pca_components,
        oracle_tol: cfg.oracle_tol,
        metrics: &metrics,
    })?;
    let ctx = Context {
        cfg,
        metrics,
        spec: AdditiveModelSpec::sine(),
        data,
        fingerprint,
    };

    let jobs: Vec<(usize, u64)> = cfg
        .n_train_grid
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let results = cfg.execution.map(jobs, |(n, s)| cached_cell(&ctx, n, s));

    let mut cells = Vec::with_capacity(results.len());
    let mut cache_hits = 0;
    for r in results {
        let (cell, hit) = r?;
        cache_hits += hit as usize;
        cells.push(cell);
    }
    let diverged = cells
        .iter()
        .filter(|c| matches!(c.outcome, CellOutcome::Diverged { .. }))
        .count();
    let curves = aggregate(&ctx.metrics, &cfg.n_train_grid, &cells);
    Ok(ExperimentOutput {
        curves,
        cells,
        diverged,
        cache_hits,
    })
}

fn cache_path(dir: &Path, scenario: Scenario, n_train: usize, seed: u64) -> PathBuf {
    dir.join(format!("{scenario}_n{n_train}_s{seed}.json"))
}

fn cached_cell(ctx: &Context<'_>, n_train: usize, seed: u64) -> Result<(CellRecord, bool)> {
    let path = ctx
        .cfg
        .cache_dir
        .as_deref()
        .map(|d| cache_path(d, ctx.cfg.scenario, n_train, seed));
    if let Some(path) = &path {
        let hit = fs::read_to_string(path)
            .ok()
            .and_then(|text| serde_json::from_str::<CellRecord>(&text).ok())
            .filter(|rec| rec.fingerprint == ctx.fingerprint);
        if let Some(rec) = hit {
            return Ok((rec, true));
        }
    }
    let record = CellRecord {
        scenario: ctx.cfg.scenario,
        n_train,
        seed,
        fingerprint: ctx.fingerprint.clone(),
        outcome: run_cell(ctx, n_train, seed)?,
    };
    if let Some(path) = &path {
        let dir = path.parent().expect("cache file has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::write(path, serde_json::to_string_pretty(&record)?).map_err(|e| Error::io(path, e))?;
    }
    Ok((record, false))
}

fn run_cell(ctx: &Context<'_>, n_train: usize, seed: u64) -> Result<CellOutcome> {
    let cfg = ctx.cfg;
    let spec = ctx.spec.clone();
    let truth = scalar(move |x| spec.f(x));

    if cfg.scenario == Scenario::McTheorem2 {
        let val = sample_additive(
            &ctx.spec,
            n_train,
            derive_seed(seed, &[MC_STREAM, n_train as u64]),
        )?;
        let metrics = evaluate(ctx, &truth, &val, &truth, &val, Some(&truth))?;
        return Ok(CellOutcome::Done { metrics, epochs: 0 });
    }

    let (train, val) = match &ctx.data {
        Some(data) => {
            let (pool, val) = split(
                data,
                SplitSpec {
                    n_train: data.n() - cfg.n_val,
                    n_val: cfg.n_val,
                    seed: derive_seed(seed, &[VAL_STREAM]),
                },
            )?;
            (pool.select(&(0..n_train).collect::<Vec<_>>())?, val)
        }
        None => (
            sample_additive(&ctx.spec, n_train, derive_seed(seed, &[TRAIN_STREAM]))?,
            sample_additive(&ctx.spec, cfg.n_val, derive_seed(seed, &[VAL_STREAM]))?,
        ),
    };
    let mlp = MlpConfig {
        seed: derive_seed(cfg.mlp.seed, &[seed, n_train as u64]),
        ..cfg.mlp.clone()
    };
    let pca = ctx.data.as_ref().map(|_| cfg.pca_components);
    let pipe = match Pipeline::fit(&train, &val, pca, &mlp) {
        Ok(p) => p,
        Err(Error::Training { epoch, .. }) => return Ok(CellOutcome::Diverged { epoch }),
        Err(e) => return Err(e),
    };
    let epochs = pipe.model.training_log.len();
    let features = Dataset::new(pipe.features(val.xs())?, val.ys().clone())?;
    let oracle = cfg
        .scenario
        .has_oracle()
        .then_some(&truth as &dyn Predictor);
    match evaluate(ctx, &pipe.head(), &features, &pipe, &val, oracle) {
        Ok(metrics) => Ok(CellOutcome::Done { metrics, epochs }),
        Err(Error::Evaluation { .. }) => Ok(CellOutcome::Diverged { epoch: epochs }),
        Err(e) => Err(e),
    }
}

/// `head` acts on `features` (the student's own input space); `full` maps
/// raw validation inputs, which is where the true function lives.
fn evaluate(
    ctx: &Context<'_>,
    head: &dyn Predictor,
    features: &Dataset,
    full: &dyn Predictor,
    val: &Dataset,
    truth: Option<&dyn Predictor>,
) -> Result<BTreeMap<Metric, f64>> {
    let mut out = BTreeMap::new();
    let mut verdict = None;
    for &metric in &ctx.metrics {
        let value = match metric {
            Metric::Mi | Metric::Decision => {
                if verdict.is_none() {
                    verdict = Some(information_teacher(head, features, &ctx.cfg.schedule)?);
                }
                let v = verdict.as_ref().expect("just set");
                if metric == Metric::Mi {
                    v.statistic
                } else {
                    f64::from(v.decision)
                }
            }
            Metric::Mse => validation_mse(head, features),
            Metric::Rmse => validation_mse(head, features).sqrt(),
            Metric::Oracle => match truth {
                Some(t) => oracle_teacher(t, full, val.xs(), ctx.cfg.oracle_tol)?.statistic,
                None => continue,
            },
        };
        if !value.is_finite() {
            return Err(Error::Evaluation { row: 0 });
        }
        out.insert(metric, value);
    }
    Ok(out)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles per (metric, grid size) over completed cells.
/// Grid sizes where every cell diverged are left out.
pub fn aggregate(metrics: &[Metric], grid: &[usize], cells: &[CellRecord]) -> Vec<ExperimentCurve> {
    let mut metrics = metrics.to_vec();
    metrics.sort();
    metrics.dedup();
    metrics
        .into_iter()
        .map(|metric| {
            let points = grid
                .iter()
                .filter_map(|&n| {
                    let mut vals: Vec<f64> = cells
                        .iter()
                        .filter(|c| c.n_train == n)
                        .filter_map(|c| match &c.outcome {
                            CellOutcome::Done { metrics, .. } => metrics.get(&metric).copied(),
                            CellOutcome::Diverged { .. } => None,
                        })
                        .collect();
                    if vals.is_empty() {
                        return None;
                    }
                    vals.sort_by(f64::total_cmp);
                    Some(CurvePoint {
                        n_train: n,
                        median: quantile(&vals, 0.5),
                        q25: quantile(&vals, 0.25),
                        q75: quantile(&vals, 0.75),
                    })
                })
                .collect();
            ExperimentCurve { metric, points }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use proptest::prelude::*;

    fn tiny(scenario: Scenario) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(scenario);
        cfg.n_train_grid = vec![50, 200];
        cfg.n_val = 200;
        cfg.seeds = vec![0, 1, 2];
        cfg.mlp.hidden_layers = vec![8];
        cfg.mlp.max_epochs = 3;
        cfg.execution = Execution::Sequential;
        cfg
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn synthetic_run_is_deterministic_and_complete() {
        let cfg = tiny(Scenario::SyntheticFavorable);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&ExperimentConfig {
            execution: Execution::Parallel,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.curves, b.curves);
        assert_eq!(a.cells.len(), 6);
        let names: Vec<_> = a.curves.iter().map(|c| c.metric).collect();
        assert_eq!(
            names,
            vec![Metric::Decision, Metric::Mi, Metric::Mse, Metric::Oracle]
        );
        for c in &a.curves {
            assert_eq!(c.points.len(), 2);
        }
    }

    #[test]
    fn mc_cells_use_true_student() {
        let mut cfg = tiny(Scenario::McTheorem2);
        cfg.metric_set = vec![Metric::Oracle, Metric::Mse, Metric::Mi];
        let out = run_experiment(&cfg).unwrap();
        let oracle = out.curve(Metric::Oracle).unwrap();
        assert!(oracle.points.iter().all(|p| p.q75 == 0.0));
        let mse = out.curve(Metric::Mse).unwrap().last().unwrap().median;
        assert!((mse - 0.25).abs() < 0.1, "{mse}");
    }

    #[test]
    fn cache_hits_reproduce_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(Scenario::SyntheticUnfavorable);
        cfg.cache_dir = Some(dir.path().to_path_buf());
        let first = run_experiment(&cfg).unwrap();
        assert_eq!(first.cache_hits, 0);
        let second = run_experiment(&cfg).unwrap();
        assert_eq!(second.cache_hits, 6);
        assert_eq!(first.cells, second.cells);
        assert!(dir
            .path()
            .join("synthetic-unfavorable_n200_s1.json")
            .exists());

        cfg.mlp.max_epochs = 4;
        let third = run_experiment(&cfg).unwrap();
        assert_eq!(third.cache_hits, 0, "changed settings must miss the cache");
    }

    #[test]
    fn divergent_cells_are_excluded() {
        let mut cfg = tiny(Scenario::SyntheticFavorable);
        cfg.mlp.optimizer = crate::regressors::Optimizer::Sgd;
        cfg.mlp.learning_rate = 1e3;
        cfg.mlp.max_epochs = 50;
        cfg.mlp.patience = 50;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.diverged > 0);
        let kept: usize = out.curves[0].points.len();
        assert!(kept <= 2);
    }

    #[test]
    fn real_data_needs_a_file() {
        let mut cfg = tiny(Scenario::RealCcpp);
        cfg.data_path = Some("/nonexistent/ccpp.csv".into());
        let err = run_experiment(&cfg).unwrap_err();
        assert!(!err.is_config());
    }

    #[test]
    fn real_data_pipeline_reports_rmse() {
        // Response linear in the first two inputs, plus two nuisance columns.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plant.csv");
        let ds = sample_additive(
            &AdditiveModelSpec::from_ids("identity", "gaussian:1", "uniform:0,1,4").unwrap(),
            600,
            5,
        )
        .unwrap();
        let mut text = String::from("AT,V,AP,RH,PE\n");
        for i in 0..ds.n() {
            let x = ds.x(i);
            let y = 400.0 + 30.0 * x[0] - 20.0 * x[1] + ds.y(i)[0];
            text.push_str(&format!("{},{},{},{},{}\n", x[0], x[1], x[2], x[3], y));
        }
        fs::write(&path, text).unwrap();
        let mut cfg = tiny(Scenario::RealCcpp);
        cfg.data_path = Some(path);
        cfg.metric_set = vec![Metric::Mse, Metric::Oracle, Metric::Decision];
        let out = run_experiment(&cfg).unwrap();
        let names: Vec<_> = out.curves.iter().map(|c| c.metric).collect();
        assert_eq!(names, vec![Metric::Decision, Metric::Rmse]);
        assert!(out
            .curve(Metric::Rmse)
            .unwrap()
            .last()
            .unwrap()
            .median
            .is_finite());
    }

    proptest! {
        #[test]
        fn curve_quartiles_are_ordered(vals in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let cells: Vec<CellRecord> = vals
                .iter()
                .enumerate()
                .map(|(i, &v)| CellRecord {
                    scenario: Scenario::McTheorem2,
                    n_train: 10,
                    seed: i as u64,
                    fingerprint: String::new(),
                    outcome: CellOutcome::Done {
                        metrics: BTreeMap::from([(Metric::Mi, v)]),
                        epochs: 0,
                    },
                })
                .collect();
            let curves = aggregate(&[Metric::Mi], &[10], &cells);
            let p = &curves[0].points[0];
            prop_assert!(p.q25 <= p.median && p.median <= p.q75);
        }
    }
}
