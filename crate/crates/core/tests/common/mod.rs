#![allow(dead_code)]

use std::io::Write;

use infoteacher::datamodel::NoiseFamily;
use infoteacher::partition::JointSample;
use infoteacher::rng::seeded;
use rand::distr::{Distribution, Open01};

/// Bivariate standard normal pairs with correlation `rho`.
pub fn gaussian_pairs(rho: f64, m: usize, seed: u64) -> Vec<JointSample> {
    let normal = NoiseFamily::Gaussian { variance: 1.0 };
    let mut rng = seeded(seed);
    let mut draw = || normal.quantile(Open01.sample(&mut rng));
    (0..m)
        .map(|_| {
            let (u, v) = (draw(), draw());
            JointSample {
                x: vec![u],
                r: vec![rho * u + (1.0 - rho * rho).sqrt() * v],
            }
        })
        .collect()
}

/// Closed-form mutual information of a bivariate normal, in nats.
pub fn gaussian_mi(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Writes straight to stderr so the line shows even when the harness
/// captures test output.
pub fn report(line: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}
