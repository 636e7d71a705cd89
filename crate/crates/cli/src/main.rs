use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infoteacher::datamodel::{csv_header, load_csv, AdditiveModelSpec, TargetFn};
use infoteacher::experiment::{emit, run_experiment, ExperimentConfig, Format, Scenario};
use infoteacher::mi::{estimate_mi, threshold, ScheduleParams};
use infoteacher::partition::JointSample;
use infoteacher::predictor::scalar;
use infoteacher::regressors::TrainedModel;
use infoteacher::teacher::{information_teacher, monte_carlo_error_rates, MonteCarloConfig};
use infoteacher::{Error, Execution, Result};

/// Decide whether a regressor is optimal by testing its residuals for
/// independence from its inputs.
#[derive(Parser)]
#[command(name = "infoteacher", version)]
struct Cli {
    /// Base seed; experiment seeds become consecutive integers from here.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, or directory for `experiment`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fewer seeds and grid points.
    #[arg(long, global = true)]
    fast: bool,
    /// Run jobs on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Judge a saved model on a CSV validation set; prints the verdict as JSON.
    Assess {
        /// Model JSON written by the training code.
        #[arg(long)]
        model: PathBuf,
        /// Validation CSV with a header row.
        #[arg(long)]
        data: PathBuf,
        /// Response columns (comma separated); defaults to the last column.
        #[arg(long, value_delimiter = ',')]
        target: Vec<String>,
    },
    /// Run a training-size sweep and write curve files.
    Experiment {
        scenario: Scenario,
        /// Flat `key = value` file overriding the scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Monte-Carlo error rates of the information teacher.
    McValidate {
        /// Validation sizes.
        #[arg(long, value_delimiter = ',', default_value = "500,2000,8000,20000")]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value = "sine10")]
        target: String,
        #[arg(long, default_value = "gaussian:0.25")]
        noise: String,
        #[arg(long, default_value = "uniform:0,1")]
        input: String,
        /// Student for the alternative hypothesis.
        #[arg(long, default_value = "zero")]
        alt: String,
    },
    /// Mutual information between the leading columns and the last column.
    EstimateMi { data: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Assess {
            model,
            data,
            target,
        } => {
            let model = TrainedModel::load_json(&model)?;
            let target = if target.is_empty() {
                last_column(&data)?
            } else {
                target
            };
            let names: Vec<&str> = target.iter().map(String::as_str).collect();
            let val = load_csv(&data, &names)?;
            let verdict = information_teacher(&model, &val, &ScheduleParams::default())?;
            write_output(
                cli.out.as_deref(),
                &(serde_json::to_string_pretty(&verdict)? + "\n"),
            )
        }
        Command::Experiment { scenario, config } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| {
                        Error::Config(format!("cannot read {}: {e}", path.display()))
                    })?;
                    ExperimentConfig::parse(&text, Some(scenario))?
                }
                None => ExperimentConfig::defaults(scenario),
            };
            if cli.fast {
                cfg.fast();
            }
            if let Some(seed) = cli.seed {
                cfg.rebase_seeds(seed);
            }
            if cli.sequential {
                cfg.execution = Execution::Sequential;
            }
            cfg.validate()?;
            let dir = cli
                .out
                .unwrap_or_else(|| PathBuf::from("results").join(scenario.name()));
            fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let out = run_experiment(&cfg)?;
            write_file(&dir.join("config.txt"), &cfg.to_kv())?;
            emit(&out.curves, &dir.join("curves.csv"), Format::Csv)?;
            emit(&out.curves, &dir.join("curves.json"), Format::Json)?;
            if out.diverged > 0 {
                eprintln!(
                    "warning: {} of {} cells diverged and were left out of the curves",
                    out.diverged,
                    out.cells.len()
                );
            }
            eprintln!(
                "{} cells ({} from cache); curves written to {}",
                out.cells.len(),
                out.cache_hits,
                dir.display()
            );
            Ok(())
        }
        Command::McValidate {
            grid,
            trials,
            target,
            noise,
            input,
            alt,
        } => {
            let spec = AdditiveModelSpec::from_ids(&target, &noise, &input)?;
            let alt: TargetFn = alt.parse()?;
            let null_spec = spec.clone();
            let null = scalar(move |x| null_spec.f(x));
            let alt = scalar(move |x| alt.eval(x));
            let cfg = MonteCarloConfig {
                m_grid: grid,
                trials: if cli.fast { trials.min(10) } else { trials },
                params: ScheduleParams::default(),
                seed: cli.seed.unwrap_or(0),
                execution,
            };
            let curve = monte_carlo_error_rates(&spec, &null, &alt, &cfg)?;
            eprintln!("null decay slope: {}", curve.null_decay_slope());
            write_output(cli.out.as_deref(), &curve.to_csv())
        }
        Command::EstimateMi { data } => {
            let target = last_column(&data)?;
            let ds = load_csv(&data, &[target[0].as_str()])?;
            let samples: Vec<JointSample> = (0..ds.n())
                .map(|i| JointSample {
                    x: ds.x(i).to_vec(),
                    r: ds.y(i).to_vec(),
                })
                .collect();
            let params = ScheduleParams::default();
            let est = estimate_mi(&samples, &params)?;
            let report = serde_json::json!({
                "value": est.value,
                "m": est.m,
                "leaf_count": est.leaf_count,
                "full_leaf_count": est.full_leaf_count,
                "threshold": threshold(est.m, &params),
            });
            write_output(
                cli.out.as_deref(),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )
        }
    }
}

fn last_column(path: &Path) -> Result<Vec<String>> {
    let header = csv_header(path)?;
    if header.len() < 2 {
        return Err(Error::IngestionFile {
            path: path.to_path_buf(),
            message: "need at least two columns".into(),
        });
    }
    Ok(vec![header[header.len() - 1].clone()])
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}
