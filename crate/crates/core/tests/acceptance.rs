//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and asserts
//! its criterion at the stated tolerance.
//!
//! Run with `cargo test -p infoteacher --test acceptance`. The real-data
//! criterion reads the plant CSV from `INFOTEACHER_CCPP_CSV`.

mod common;

use std::time::{Duration, Instant};

use common::{gaussian_mi, gaussian_pairs, median, report};
use infoteacher::datamodel::{sample_additive, AdditiveModelSpec, PcaModel};
use infoteacher::experiment::{run_experiment, CellOutcome, ExperimentConfig, Metric, Scenario};
use infoteacher::mi::{estimate_mi, ScheduleParams};
use infoteacher::partition::{grow_full_tree, JointSample, PartitionParams};
use infoteacher::predictor::scalar;
use infoteacher::regressors::Mlp;
use infoteacher::rng::seeded;
use infoteacher::teacher::{
    information_teacher, monte_carlo_error_rates, oracle_teacher, MonteCarloConfig,
};
use infoteacher::Execution;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    report(&format!("[acceptance] {id} {name}: {status} ({detail})"));
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn mc(m_grid: Vec<usize>, trials: usize, seed: u64) -> MonteCarloConfig {
    MonteCarloConfig {
        m_grid,
        trials,
        params: ScheduleParams::default(),
        seed,
        execution: Execution::Parallel,
    }
}

#[test]
fn c1_gaussian_mutual_information() {
    let start = Instant::now();
    let params = ScheduleParams::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for rho in [0.0, 0.5, 0.9] {
        let estimates = (0..10)
            .map(|seed| {
                estimate_mi(&gaussian_pairs(rho, 20_000, seed), &params)
                    .unwrap()
                    .value
            })
            .collect();
        let med = median(estimates);
        let target = gaussian_mi(rho);
        ok &= (med - target).abs() <= 0.15;
        parts.push(format!("rho={rho}: median {med:.4} vs {target:.4}"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed <= Duration::from_secs(120);
    parts.push(format!("{:.1}s", elapsed.as_secs_f64()));
    verdict(1, "Gaussian MI within 0.15 nats", ok, parts.join("; "));
}

#[test]
fn c2_null_acceptance() {
    let spec = AdditiveModelSpec::from_ids("zero", "gaussian:1", "uniform:0,1").unwrap();
    let null = scalar(|_| 0.0);
    let alt = scalar(|x| x[0]);
    let curve = monte_carlo_error_rates(
        &spec,
        &null,
        &alt,
        &mc(vec![500, 2000, 8000, 20_000], 50, 11),
    )
    .unwrap();
    let correct = 1.0 - curve.alpha_hat.last().unwrap();
    let inversions = curve.alpha_hat.windows(2).filter(|w| w[1] > w[0]).count();
    verdict(
        2,
        "independence accepted at m=2e4, wrong rate weakly decreasing",
        correct >= 0.95 && inversions <= 1,
        format!(
            "wrong rates {:?}, correct at 2e4 {correct}, inversions {inversions}",
            curve.alpha_hat
        ),
    );
}

#[test]
fn c3_dependence_detection() {
    let spec = AdditiveModelSpec::sine();
    let truth = spec.clone();
    let null = scalar(move |x| truth.f(x));
    let zero = scalar(|_| 0.0);
    let curve = monte_carlo_error_rates(&spec, &null, &zero, &mc(vec![20_000], 50, 12)).unwrap();
    let detected = 1.0 - curve.beta_hat[0];
    verdict(
        3,
        "zero student rejected on sine model",
        detected >= 0.95,
        format!("rejected in {:.0}% of 50 trials", 100.0 * detected),
    );
}

#[test]
fn c4_oracle_agreement() {
    let spec = AdditiveModelSpec::sine();
    let params = ScheduleParams::default();
    let (f0, f1, f2) = (spec.clone(), spec.clone(), spec.clone());
    let truth = scalar(move |x| f0.f(x));
    let shifted = scalar(move |x| f1.f(x) + 0.5);
    let exact = scalar(move |x| f2.f(x));
    let zero = scalar(|_| 0.0);
    let students: [(&str, &dyn infoteacher::Predictor); 3] =
        [("f", &exact), ("f+0.5", &shifted), ("0", &zero)];
    let mut agree = 0;
    let mut total = 0;
    let mut per_student = Vec::new();
    for (name, student) in students {
        let mut hits = 0;
        for seed in 0..20 {
            let val = sample_additive(&spec, 10_000, 1000 + seed).unwrap();
            let info = information_teacher(student, &val, &params).unwrap();
            let oracle = oracle_teacher(&truth, student, val.xs(), 1e-3).unwrap();
            hits += (info.decision == oracle.decision) as usize;
        }
        agree += hits;
        total += 20;
        per_student.push(format!("{name}: {hits}/20"));
    }
    let rate = agree as f64 / total as f64;
    verdict(
        4,
        "information and oracle verdicts agree on >= 90% of pairs",
        rate >= 0.9,
        format!("{:.1}% agreement; {}", 100.0 * rate, per_student.join(", ")),
    );
}

#[test]
fn c5_favorable_trend() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::defaults(Scenario::SyntheticFavorable);
    cfg.fast();
    let out = run_experiment(&cfg).unwrap();
    let elapsed = start.elapsed();
    let mi = out.curve(Metric::Mi).unwrap().last().unwrap();
    let oracle = out.curve(Metric::Oracle).unwrap().last().unwrap();
    let a = cfg.validation_threshold();
    verdict(
        5,
        "favorable MLP: MI below threshold and oracle error <= 0.02 at largest size",
        mi.median < a && oracle.median <= 0.02 && elapsed <= Duration::from_secs(1800),
        format!(
            "n={}: MI median {:.4} vs a={a:.4}, oracle median {:.5}, {} diverged, {:.0}s",
            mi.n_train,
            mi.median,
            oracle.median,
            out.diverged,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c6_unfavorable_plateau() {
    let cfg = ExperimentConfig::defaults(Scenario::SyntheticUnfavorable);
    let out = run_experiment(&cfg).unwrap();
    let a = cfg.validation_threshold();
    let mi = &out.curve(Metric::Mi).unwrap().points;
    let oracle = &out.curve(Metric::Oracle).unwrap().points;
    let tail = |pts: &[infoteacher::experiment::CurvePoint], level: f64| {
        pts[pts.len() - 2..].iter().all(|p| p.median > level)
    };
    let largest = *cfg.n_train_grid.last().unwrap();
    let rejected: Vec<bool> = out
        .cells
        .iter()
        .filter(|c| c.n_train == largest)
        .filter_map(|c| match &c.outcome {
            CellOutcome::Done { metrics, .. } => Some(metrics[&Metric::Decision] == 0.0),
            CellOutcome::Diverged { .. } => None,
        })
        .collect();
    let frac = rejected.iter().filter(|&&r| r).count() as f64 / rejected.len() as f64;
    let last = |pts: &[infoteacher::experiment::CurvePoint]| pts.last().unwrap().median;
    verdict(
        6,
        "unfavorable MLP: MI and oracle plateau above thresholds, >= 80% rejected",
        tail(mi, a) && tail(oracle, cfg.oracle_tol) && frac >= 0.8,
        format!(
            "MI median {:.4} vs a={a:.4}, oracle median {:.4}, rejected {:.0}% of {} seeds",
            last(mi),
            last(oracle),
            100.0 * frac,
            rejected.len()
        ),
    );
}

#[test]
fn c7_real_data_rmse_plateau() {
    let Some(path) = std::env::var_os("INFOTEACHER_CCPP_CSV") else {
        verdict(
            7,
            "real-data RMSE plateau in [5, 7]",
            false,
            "plant data unavailable: set INFOTEACHER_CCPP_CSV to the CSV file".into(),
        );
        return;
    };
    let start = Instant::now();
    let mut cfg = ExperimentConfig::defaults(Scenario::RealCcpp);
    cfg.data_path = Some(path.into());
    let out = run_experiment(&cfg).unwrap();
    let elapsed = start.elapsed();
    let rmse = out.curve(Metric::Rmse).unwrap().last().unwrap();
    verdict(
        7,
        "real-data RMSE plateau in [5, 7]",
        (5.0..=7.0).contains(&rmse.median) && elapsed <= Duration::from_secs(1800),
        format!(
            "n={}: RMSE median {:.3} (IQR {:.3}..{:.3}), {:.0}s",
            rmse.n_train,
            rmse.median,
            rmse.q25,
            rmse.q75,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c8_null_error_decay_slope() {
    let spec = AdditiveModelSpec::from_ids("zero", "gaussian:1", "uniform:0,1").unwrap();
    let null = scalar(|_| 0.0);
    let alt = scalar(|x| x[0]);
    let grid = vec![200, 400, 800, 1600, 3200, 6400];
    let curve = monte_carlo_error_rates(&spec, &null, &alt, &mc(grid, 100, 13)).unwrap();
    let slope = curve.null_decay_slope();
    verdict(
        8,
        "log wrong-decision rate against m^(1/3) has negative slope",
        slope < 0.0,
        format!("slope {slope:.4}, wrong rates {:?}", curve.alpha_hat),
    );
}

fn random_network_gradient_error(rng: &mut impl Rng) -> f64 {
    let mut sizes = vec![rng.random_range(1..4), rng.random_range(1..6)];
    if rng.random_bool(0.5) {
        sizes.push(rng.random_range(1..5));
    }
    sizes.push(rng.random_range(1..3));
    let mut net = Mlp::init(&sizes, rng);
    for layer in &mut net.layers {
        layer.b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let batch = rng.random_range(1..10);
    let xs = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-2.0..2.0));
    let ys = Array2::from_shape_fn((batch, *sizes.last().unwrap()), |_| {
        rng.random_range(-1.0..1.0)
    });
    let (_, grads) = net.loss_and_gradient(&xs, &ys);
    let analytic = grads.flat();
    let base = net.flat_params();
    let h = 1e-5;
    let mut probe = net.clone();
    let numeric: Vec<f64> = (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_flat_params(&p);
            let up = probe.loss(&xs, &ys);
            p[i] = base[i] - h;
            probe.set_flat_params(&p);
            (up - probe.loss(&xs, &ys)) / (2.0 * h)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12)
}

fn random_samples(rng: &mut impl Rng, m: usize, p: usize, q: usize) -> Vec<JointSample> {
    (0..m)
        .map(|_| {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = (0..q)
                .map(|j| x[j % p] * 0.7 + rng.random_range(-1.0..1.0))
                .collect();
            JointSample { x, r }
        })
        .collect()
}

fn ranks(samples: &[JointSample]) -> Vec<JointSample> {
    let rank_column = |vals: Vec<f64>| -> Vec<f64> {
        vals.iter()
            .map(|v| vals.iter().filter(|w| *w < v).count() as f64)
            .collect()
    };
    let p = samples[0].x.len();
    let q = samples[0].r.len();
    let xcols: Vec<Vec<f64>> = (0..p)
        .map(|j| rank_column(samples.iter().map(|s| s.x[j]).collect()))
        .collect();
    let rcols: Vec<Vec<f64>> = (0..q)
        .map(|j| rank_column(samples.iter().map(|s| s.r[j].powi(3) * 5.0 - 2.0).collect()))
        .collect();
    (0..samples.len())
        .map(|i| JointSample {
            x: xcols.iter().map(|c| c[i]).collect(),
            r: rcols.iter().map(|c| c[i]).collect(),
        })
        .collect()
}

#[test]
fn c9_numerical_property_suite() {
    let mut rng = seeded(2024);
    let mut failures = Vec::new();

    let worst_grad = (0..50)
        .map(|_| random_network_gradient_error(&mut rng))
        .fold(0.0, f64::max);
    if worst_grad > 1e-4 {
        failures.push(format!("gradient relative error {worst_grad:e}"));
    }

    let mut worst_orth: f64 = 0.0;
    for _ in 0..20 {
        let (n, p) = (rng.random_range(10..200), rng.random_range(1..7));
        let xs = Array2::from_shape_fn((n, p), |(_, j)| {
            rng.random_range(-1.0..1.0) * (j + 1) as f64
        });
        let pca = PcaModel::fit(&xs, p).unwrap();
        for a in 0..p {
            for b in 0..p {
                let dot: f64 = (0..p)
                    .map(|k| pca.components[a][k] * pca.components[b][k])
                    .sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((dot - expected).abs());
            }
        }
    }
    if worst_orth > 1e-8 {
        failures.push(format!("PCA orthonormality error {worst_orth:e}"));
    }

    let mut bad_counts = 0;
    for _ in 0..200 {
        let m = rng.random_range(2..600);
        let (p, q) = (rng.random_range(1..4), rng.random_range(1..3));
        let samples = random_samples(&mut rng, m, p, q);
        let params = PartitionParams {
            ell: rng.random_range(0.05..0.33),
            lambda: 0.0,
            b_scale: rng.random_range(0.005..0.5),
        };
        let tree = grow_full_tree(&samples, params).unwrap();
        if tree.leaves().map(|l| l.count).sum::<usize>() != m {
            bad_counts += 1;
        }
    }
    if bad_counts > 0 {
        failures.push(format!(
            "{bad_counts} partitions whose leaf counts do not sum to m"
        ));
    }

    let params = ScheduleParams::default();
    let mut perm_breaks = 0;
    let mut rank_breaks = 0;
    for _ in 0..20 {
        let m = rng.random_range(50..3000);
        let p = rng.random_range(1..3);
        let samples = random_samples(&mut rng, m, p, 1);
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut rng);
        if estimate_mi(&samples, &params).unwrap().value
            != estimate_mi(&shuffled, &params).unwrap().value
        {
            perm_breaks += 1;
        }
        let full = |s: &[JointSample]| {
            grow_full_tree(s, params.partition)
                .unwrap()
                .mutual_information()
        };
        if full(&samples) != full(&ranks(&samples)) {
            rank_breaks += 1;
        }
    }
    if perm_breaks > 0 {
        failures.push(format!("{perm_breaks} permutation invariance breaks"));
    }
    if rank_breaks > 0 {
        failures.push(format!("{rank_breaks} rank-transform invariance breaks"));
    }

    let detail = if failures.is_empty() {
        format!(
            "worst gradient error {worst_grad:.1e}, worst orthonormality error {worst_orth:.1e}"
        )
    } else {
        failures.join("; ")
    };
    verdict(9, "numerical property suite", failures.is_empty(), detail);
}
