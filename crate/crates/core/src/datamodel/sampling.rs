use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::distr::{Distribution, Open01};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Registry of regression functions. All entries act on the first input
/// coordinate and produce a scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetFn {
    /// x ↦ sin(10x)
    Sine10,
    Identity,
    Zero,
    Constant(f64),
    /// Piecewise-linear interpolation through sorted knots, clamped outside.
    Tabulated(Vec<(f64, f64)>),
}

impl TargetFn {
    pub fn tabulated(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Config(
                "tabulated function needs at least one knot".into(),
            ));
        }
        if knots.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Config("tabulated knots must be finite".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(TargetFn::Tabulated(knots))
    }

    pub fn eval(&self, x: ArrayView1<'_, f64>) -> f64 {
        let t = x[0];
        match self {
            TargetFn::Sine10 => (10.0 * t).sin(),
            TargetFn::Identity => t,
            TargetFn::Zero => 0.0,
            TargetFn::Constant(c) => *c,
            TargetFn::Tabulated(knots) => interpolate(knots, t),
        }
    }
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let hi = knots.partition_point(|k| k.0 <= t);
    let (x0, y0) = knots[hi - 1];
    let (x1, y1) = knots[hi];
    if x1 == x0 {
        return y1;
    }
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

impl FromStr for TargetFn {
    type Err = Error;

    /// Accepts `sine10`, `identity`, `zero`, `constant:<c>` and
    /// `tabulated:x0=y0;x1=y1;...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "sine10" => return Ok(TargetFn::Sine10),
            "identity" => return Ok(TargetFn::Identity),
            "zero" => return Ok(TargetFn::Zero),
            _ => {}
        }
        if let Some(c) = s.strip_prefix("constant:") {
            return parse_f64(c).map(TargetFn::Constant);
        }
        if let Some(body) = s.strip_prefix("tabulated:") {
            let knots = body
                .split(';')
                .filter(|k| !k.trim().is_empty())
                .map(|k| {
                    let (a, b) = k
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("bad knot `{k}`")))?;
                    Ok((parse_f64(a)?, parse_f64(b)?))
                })
                .collect::<Result<Vec<_>>>()?;
            return TargetFn::tabulated(knots);
        }
        Err(Error::Config(format!("unknown target function `{s}`")))
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("`{s}` is not a number")))
}

/// Zero-mean noise families, each realised as h(W) with W ~ U(0,1) through
/// its inverse CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseFamily {
    Degenerate,
    Gaussian { variance: f64 },
    Uniform { half_width: f64 },
    Laplace { scale: f64 },
}

impl NoiseFamily {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseFamily::Degenerate => true,
            NoiseFamily::Gaussian { variance } => variance.is_finite() && variance > 0.0,
            NoiseFamily::Uniform { half_width } => half_width.is_finite() && half_width > 0.0,
            NoiseFamily::Laplace { scale } => scale.is_finite() && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise parameters {self:?}")))
        }
    }

    /// h(w) for w in (0, 1).
    pub fn quantile(&self, w: f64) -> f64 {
        match *self {
            NoiseFamily::Degenerate => 0.0,
            NoiseFamily::Gaussian { variance } => {
                // Φ⁻¹ is antisymmetric about ½; evaluating the lower half only
                // keeps the tails exactly mirrored.
                let z = if w < 0.5 {
                    standard_normal().inverse_cdf(w)
                } else {
                    -standard_normal().inverse_cdf(1.0 - w)
                };
                variance.sqrt() * z
            }
            NoiseFamily::Uniform { half_width } => half_width * (2.0 * w - 1.0),
            NoiseFamily::Laplace { scale } => {
                let u = w - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseFamily::Degenerate => 0.0,
            NoiseFamily::Gaussian { variance } => variance,
            NoiseFamily::Uniform { half_width } => half_width * half_width / 3.0,
            NoiseFamily::Laplace { scale } => 2.0 * scale * scale,
        }
    }

    /// Analytic mean; zero for every family.
    pub fn mean(&self) -> f64 {
        0.0
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

impl FromStr for NoiseFamily {
    type Err = Error;

    /// `none`, `gaussian:<variance>`, `uniform:<half_width>`, `laplace:<scale>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (tag, arg) = s.split_once(':').unwrap_or((s, ""));
        let noise = match tag {
            "none" | "degenerate" => NoiseFamily::Degenerate,
            "gaussian" => NoiseFamily::Gaussian {
                variance: parse_f64(arg)?,
            },
            "uniform" => NoiseFamily::Uniform {
                half_width: parse_f64(arg)?,
            },
            "laplace" => NoiseFamily::Laplace {
                scale: parse_f64(arg)?,
            },
            _ => return Err(Error::Config(format!("unknown noise family `{s}`"))),
        };
        noise.validate()?;
        Ok(noise)
    }
}

/// Marginal law of the inputs, with its dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputLaw {
    Uniform { low: f64, high: f64, dim: usize },
    Gaussian { mean: f64, std: f64, dim: usize },
}

impl InputLaw {
    pub fn unit_interval() -> Self {
        InputLaw::Uniform {
            low: 0.0,
            high: 1.0,
            dim: 1,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            InputLaw::Uniform { dim, .. } | InputLaw::Gaussian { dim, .. } => dim,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            InputLaw::Uniform { low, high, dim } => {
                low.is_finite() && high.is_finite() && low < high && dim >= 1
            }
            InputLaw::Gaussian { mean, std, dim } => {
                mean.is_finite() && std.is_finite() && std > 0.0 && dim >= 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid input law {self:?}")))
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            InputLaw::Uniform { low, high, .. } => low + (high - low) * rng.random::<f64>(),
            InputLaw::Gaussian { mean, std, .. } => {
                let w: f64 = Open01.sample(rng);
                mean + std * standard_normal().inverse_cdf(w)
            }
        }
    }
}

impl FromStr for InputLaw {
    type Err = Error;

    /// `uniform:<low>,<high>[,<dim>]` or `gaussian:<mean>,<std>[,<dim>]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (tag, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("bad input law `{s}`")))?;
        let parts: Vec<&str> = args.split(',').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(Error::Config(format!("bad input law `{s}`")));
        }
        let a = parse_f64(parts[0])?;
        let b = parse_f64(parts[1])?;
        let dim = match parts.get(2) {
            Some(d) => d
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad dimension `{d}`")))?,
            None => 1,
        };
        let law = match tag {
            "uniform" => InputLaw::Uniform {
                low: a,
                high: b,
                dim,
            },
            "gaussian" => InputLaw::Gaussian {
                mean: a,
                std: b,
                dim,
            },
            _ => return Err(Error::Config(format!("unknown input law `{tag}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

/// (X, Y) = (X, f(X) + h(W)) with W ~ U(0,1) independent of X ~ P_X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModelSpec {
    pub target: TargetFn,
    pub noise: NoiseFamily,
    pub input: InputLaw,
}

impl AdditiveModelSpec {
    /// sin(10x) + N(0, 0.25) on U[0, 1].
    pub fn sine() -> Self {
        AdditiveModelSpec {
            target: TargetFn::Sine10,
            noise: NoiseFamily::Gaussian { variance: 0.25 },
            input: InputLaw::unit_interval(),
        }
    }

    /// Builds a spec from registry identifiers, e.g. `("sine10", "gaussian:0.25", "uniform:0,1")`.
    pub fn from_ids(f_id: &str, noise: &str, input: &str) -> Result<Self> {
        Ok(AdditiveModelSpec {
            target: f_id.parse()?,
            noise: noise.parse()?,
            input: input.parse()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.input.validate()
    }

    pub fn f(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.target.eval(x)
    }
}

/// Draws `n` i.i.d. rows from the additive model. Pure in `(spec, n, seed)`.
pub fn sample_additive(spec: &AdditiveModelSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Size("sample size must be at least 1".into()));
    }
    let p = spec.input.dim();
    let mut rng = seeded(seed);
    let mut xs = Array2::zeros((n, p));
    let mut ys = Array2::zeros((n, 1));
    for i in 0..n {
        for j in 0..p {
            xs[[i, j]] = spec.input.draw(&mut rng);
        }
        let w: f64 = Open01.sample(&mut rng);
        ys[[i, 0]] = spec.f(xs.row(i)) + spec.noise.quantile(w);
    }
    Dataset::new(xs, ys)
}
