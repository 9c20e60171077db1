//! Command-line parsing and dispatch.
//!
//! Exit codes: 0 success / verdict pass, 1 verdict fail, 2 malformed input,
//! 3 usage error or unknown experiment, 4 numerical failure.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sigpath_core::ito::{self, LinearVectorField};
use sigpath_core::path::PiecewiseLinearPath;
use sigpath_core::regression::{self, DatasetConfig, Metrics};
use sigpath_core::topology::{self, EXPERIMENT_NAMES};
use sigpath_core::{log_signature, signature, Error as CoreError, ExperimentReport};
use thiserror::Error;

use crate::io::{self, InputError};
use crate::render;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

/// Resolved global settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub depth: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub format: Format,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            depth: 4,
            tolerance: ito::ORACLE_TOL,
            seed: 0,
            format: Format::Text,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sigpath", version, about = "Signatures, unparameterised path metrics and signature-series ODE solves")]
struct Cli {
    /// Truncation depth [default: 4; product-vs-metric uses k-max + 1]
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Random seed
    #[arg(long, global = true, env = "SIGPATH_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Agreement tolerance of the RK4 integration oracle
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Truncated signature of a path CSV file
    Signature {
        path: PathBuf,
        /// Print the log-signature instead
        #[arg(long)]
        log: bool,
    },
    /// Tree-reduced form, length and p-variation of a path CSV file
    Inspect {
        path: PathBuf,
        /// Variation exponent, at least 1
        #[arg(long, default_value_t = 1.5)]
        p: f64,
    },
    /// Run a named witness experiment
    Experiment(ExperimentArgs),
    /// Signature-series solution of an affine controlled ODE
    Solve {
        /// Vector field JSON: {"d", "w", "A": [d][w][w], "b": [d][w] (optional)}
        field: PathBuf,
        /// Driving path CSV
        path: PathBuf,
        /// Initial value, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y0: Vec<f64>,
        /// Number of series terms N
        #[arg(short = 'N', long = "terms", default_value_t = 8)]
        terms: usize,
    },
    /// Fit linear functionals on signature features to ODE responses
    Regress {
        /// JSON regression configuration; omitted fields take demo defaults
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the deepest fitted functional as JSON
        #[arg(long)]
        functional_out: Option<PathBuf>,
        /// Write the generated dataset as JSON
        #[arg(long)]
        dataset_out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// One of product-vs-metric, quotient-vs-metric, incompleteness,
    /// group-discontinuity, length-bound
    name: String,
    /// Largest witness index for product-vs-metric
    #[arg(long, default_value_t = 5)]
    k_max: usize,
    /// [default: 10 for incompleteness, 20 for group-discontinuity, 5 for length-bound]
    #[arg(long)]
    n_max: Option<usize>,
    /// Loop heights for quotient-vs-metric, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.01, 0.001])]
    eps: Vec<f64>,
    /// Monte Carlo draws for length-bound
    #[arg(long, default_value_t = topology::DEFAULT_MC_SAMPLES)]
    samples: usize,
    /// Axis path CSV for length-bound [default: e1 then e2]
    #[arg(long)]
    path: Option<PathBuf>,
}

/// Regression configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    pub n_paths: usize,
    pub segment_count: usize,
    pub radius: f64,
    pub noise_scale: f64,
    pub train_fraction: f64,
    pub depth: usize,
    pub ridge: f64,
    /// Vector field; the built-in demo field (scaled to C·r = 1) when absent.
    pub field: Option<LinearVectorField>,
    pub y0: Option<Vec<f64>>,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            n_paths: 200,
            segment_count: 4,
            radius: 1.0,
            noise_scale: 0.0,
            train_fraction: 0.75,
            depth: 3,
            ridge: 0.0,
            field: None,
            y0: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct RegressOutput {
    seed: u64,
    depth: usize,
    ridge: f64,
    n_paths: usize,
    rank: usize,
    rank_deficient: bool,
    metrics: Metrics,
    by_depth: Vec<Metrics>,
}

#[derive(Debug, Serialize)]
struct InspectOutput {
    dim: usize,
    segments: usize,
    length: f64,
    reduced_segments: usize,
    reduced_length: f64,
    p: f64,
    p_variation: f64,
    reduced: PiecewiseLinearPath,
}

#[derive(Debug, Error)]
enum Failure {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Core(CoreError),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonConvergence(_) => Failure::Numeric(e.to_string()),
            other => Failure::Core(other),
        }
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) | Failure::Core(_) | Failure::Output(_) => EXIT_INPUT,
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "sigpath: {f}");
            f.code()
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let defaults = Config::default();
    let tolerance = cli.tolerance.unwrap_or(defaults.tolerance);
    if !(tolerance > 0.0) {
        return Err(Failure::Usage(format!("--tolerance must be positive, got {tolerance}")));
    }
    let config = Config {
        depth: cli.depth.unwrap_or(defaults.depth),
        tolerance,
        seed: cli.seed.unwrap_or(defaults.seed),
        format: cli.format,
    };
    match cli.command {
        Command::Signature { path, log } => {
            let p = io::read_path_csv(&path)?;
            let t = if log {
                log_signature(&p, config.depth)?
            } else {
                signature(&p, config.depth)?.into_inner()
            };
            match config.format {
                Format::Json => emit_json(out, &t)?,
                Format::Text => write!(out, "{}", render::tensor(&t))?,
            }
            Ok(EXIT_OK)
        }
        Command::Inspect { path, p } => {
            let raw = io::read_path_csv(&path)?;
            let reduced = raw.reduce();
            let report = InspectOutput {
                dim: raw.dim(),
                segments: raw.segment_count(),
                length: raw.length(),
                reduced_segments: reduced.segment_count(),
                reduced_length: reduced.length(),
                p,
                p_variation: raw.p_variation(p)?,
                reduced,
            };
            match config.format {
                Format::Json => emit_json(out, &report)?,
                Format::Text => {
                    writeln!(out, "dimension        {}", report.dim)?;
                    writeln!(out, "segments         {}", report.segments)?;
                    writeln!(out, "length           {}", render::num(report.length))?;
                    writeln!(out, "reduced segments {}", report.reduced_segments)?;
                    writeln!(out, "reduced length   {}", render::num(report.reduced_length))?;
                    writeln!(out, "{}-variation   {}", report.p, render::num(report.p_variation))?;
                    write!(out, "{}", io::path_to_csv(&report.reduced))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Experiment(args) => {
            let report = experiment(&args, &cli.depth, &config)?;
            match config.format {
                Format::Json => emit_json(out, &report)?,
                Format::Text => write!(out, "{}", render::experiment(&report))?,
            }
            Ok(if report.verdict { EXIT_OK } else { EXIT_VERDICT })
        }
        Command::Solve { field, path, y0, terms } => {
            let f: LinearVectorField = io::read_json(&field)?;
            let p = io::read_path_csv(&path)?;
            let series = ito::ito_series(&f, &p, &y0, terms)?;
            let oracle = ito::oracle_solve_with_tol(&f, &p, &y0, config.tolerance)?;
            let s = series.with_oracle(oracle);
            match config.format {
                Format::Json => emit_json(out, &s)?,
                Format::Text => write!(out, "{}", render::solution(&s))?,
            }
            Ok(EXIT_OK)
        }
        Command::Regress {
            config: file,
            functional_out,
            dataset_out,
        } => {
            let mut rc: RegressConfig = match &file {
                Some(path) => io::read_json(path)?,
                None => RegressConfig::default(),
            };
            if let Some(d) = cli.depth {
                rc.depth = d;
            }
            let field = match rc.field.clone() {
                Some(f) => f,
                None => regression::demo_field(rc.radius)?,
            };
            let y0 = rc.y0.clone().unwrap_or_else(|| {
                if rc.field.is_none() {
                    regression::DEMO_Y0.to_vec()
                } else {
                    vec![0.0; field.state_dim()]
                }
            });
            let dataset_config = DatasetConfig {
                n_paths: rc.n_paths,
                segment_count: rc.segment_count,
                radius: rc.radius,
                noise_scale: rc.noise_scale,
                seed: config.seed,
                feature_depth: rc.depth,
                train_fraction: rc.train_fraction,
            };
            let data = regression::generate_dataset(&field, &y0, &dataset_config)?;
            let by_depth = (1..=rc.depth)
                .map(|n| regression::evaluate(&regression::fit(&data, n, rc.ridge)?.functional, &data))
                .collect::<Result<Vec<_>, _>>()?;
            let fitted = regression::fit(&data, rc.depth, rc.ridge)?;
            let metrics = regression::evaluate(&fitted.functional, &data)?;
            if let Some(path) = functional_out {
                write_json_file(&path, &fitted.functional)?;
            }
            if let Some(path) = dataset_out {
                write_json_file(&path, &data)?;
            }
            let report = RegressOutput {
                seed: config.seed,
                depth: rc.depth,
                ridge: rc.ridge,
                n_paths: rc.n_paths,
                rank: fitted.rank,
                rank_deficient: fitted.rank_deficient,
                metrics,
                by_depth,
            };
            match config.format {
                Format::Json => emit_json(out, &report)?,
                Format::Text => {
                    writeln!(
                        out,
                        "{} paths (seed {}), fit depth {}, ridge {}, rank {}{}",
                        report.n_paths,
                        report.seed,
                        report.depth,
                        report.ridge,
                        report.rank,
                        if report.rank_deficient { " (rank deficient)" } else { "" }
                    )?;
                    write!(out, "{}", render::metrics(&report.by_depth))?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn experiment(args: &ExperimentArgs, depth: &Option<usize>, config: &Config) -> Result<ExperimentReport, Failure> {
    let report = match args.name.as_str() {
        "product-vs-metric" => topology::experiment_product_vs_metric(args.k_max, depth.unwrap_or(args.k_max + 1))?,
        "quotient-vs-metric" => topology::experiment_quotient_vs_metric(&args.eps)?,
        "incompleteness" => topology::experiment_incompleteness(args.n_max.unwrap_or(10))?,
        "group-discontinuity" => topology::experiment_group_discontinuity(args.n_max.unwrap_or(20))?,
        "length-bound" => {
            let path = match &args.path {
                Some(p) => io::read_path_csv(p)?,
                None => PiecewiseLinearPath::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]])?,
            };
            topology::length_lower_bound(&path, args.n_max.unwrap_or(5), args.samples, config.seed)?
        }
        other => {
            return Err(Failure::Usage(format!(
                "unknown experiment {other:?}; expected one of {}",
                EXPERIMENT_NAMES.join(", ")
            )))
        }
    };
    Ok(report)
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn write_json_file<T: Serialize>(path: &std::path::Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numeric(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
