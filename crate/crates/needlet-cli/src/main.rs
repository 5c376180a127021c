//! `needlet` — command-line workflows for needlet-kernel regression on S².
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 invariant-validation
//! failure. Every JSON artifact embeds the library version and the fully
//! resolved configuration; record CSVs are byte-reproducible given the same
//! flags and seed, except for the wall_ms timing column.

mod output;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use needlet::estimators::{krr_fit, lq_fit, truncate, Dataset};
use needlet::harness::{
    lambda_sweep, learning_curve, phase_transition, q_sweep, rate_fit, ExperimentConfig,
};
use needlet::kernel::NeedletKernel;
use needlet::quadrature::{cubature_weights, mz_check, CubatureTarget};
use needlet::seed::derive_seed;
use needlet::simulation::{
    distortion, generate_labels, make_target, sample_design, NoiseModel, SamplingDesign,
    TargetShape,
};
use needlet::window::{make_window, WindowProfile};
use output::{write_dataset_csv, write_json, write_records_csv, Report};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "needlet", version = needlet::VERSION, about = "Needlet-kernel regression workflows on the sphere")]
struct Cli {
    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed; the NEEDLET_SEED environment variable takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for experiment trials (1 = fully sequential).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum WindowArg {
    SmoothBump,
    LinearRamp,
}

impl From<WindowArg> for WindowProfile {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::SmoothBump => WindowProfile::SmoothBump,
            WindowArg::LinearRamp => WindowProfile::LinearRamp,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DesignArg {
    Uniform,
    CapBiased,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ShapeArg {
    Zonal,
    Random,
}

impl From<ShapeArg> for TargetShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Zonal => TargetShape::Zonal,
            ShapeArg::Random => TargetShape::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    Krr,
    Lq,
}

#[derive(Subcommand)]
enum Command {
    /// Check kernel invariants and emit a JSON report (exit 2 on failure).
    ValidateKernel {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, value_enum, default_value_t = WindowArg::SmoothBump)]
        window: WindowArg,
    },
    /// Random-node cubature weights and the MZ inequality pass rate.
    Cubature {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        trials: usize,
    },
    /// Draw a synthetic dataset and write it as CSV.
    Simulate {
        #[arg(long, value_enum, default_value_t = DesignArg::Uniform)]
        design: DesignArg,
        /// Concentration of the cap-biased design (ignored for uniform).
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 32)]
        band: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value_t = ShapeArg::Random)]
        shape: ShapeArg,
    },
    /// Fit an estimator to a dataset CSV and write the expansion as JSON.
    Fit {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
        /// Clamp level M for the truncation operator.
        #[arg(long)]
        truncate: Option<f64>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = WindowArg::SmoothBump)]
        window: WindowArg,
    },
    /// Run the learning curve described by a JSON config.
    LearningCurve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Learning curves across λ multipliers, with ratios against c = 1.
    SweepLambda {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        multipliers: Vec<f64>,
    },
    /// Learning curves across q values with per-q λ rules.
    SweepQ {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "q-values", value_delimiter = ',', default_value = "0.5,1,2")]
        q_values: Vec<f64>,
    },
    /// Failure probability P(error > ε) across an m grid at fixed ε.
    PhaseTransition {
        #[arg(long)]
        config: PathBuf,
        /// Absolute accuracy target; overrides --epsilon-frac.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Accuracy as a fraction of ‖f_ρ‖²_ρ.
        #[arg(long, default_value_t = 0.05)]
        epsilon_frac: f64,
        #[arg(long, value_delimiter = ',')]
        m_grid: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1; --help/--version print and exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Seed precedence: NEEDLET_SEED env var, then --seed, then the fallback
/// (a config file's seed or zero).
fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64> {
    if let Ok(v) = std::env::var("NEEDLET_SEED") {
        return v
            .trim()
            .parse::<u64>()
            .with_context(|| format!("NEEDLET_SEED must be a u64, got {v:?}"));
    }
    Ok(flag.unwrap_or(fallback))
}

fn load_config(path: &PathBuf, seed_flag: Option<u64>) -> Result<ExperimentConfig> {
    let body = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&body).with_context(|| format!("parsing {}", path.display()))?;
    config.seed = resolve_seed(seed_flag, config.seed)?;
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<bool> {
    let out = &cli.out;
    match cli.command {
        Command::ValidateKernel { n, d, window } => {
            let seed = resolve_seed(cli.seed, 0)?;
            let report =
                needlet::validate::validate_kernel(n, d, make_window(window.into()), seed)?;
            let passed = report.passed();

            #[derive(Serialize)]
            struct Config {
                n: usize,
                d: usize,
                window: WindowArg,
                seed: u64,
            }
            #[derive(Serialize)]
            struct Payload {
                passed: bool,
                checks: Vec<needlet::validate::KernelCheck>,
            }
            let path = write_json(
                out,
                "validate_kernel.json",
                &Report {
                    version: needlet::VERSION,
                    command: "validate-kernel",
                    config: Config { n, d, window, seed },
                    payload: Payload { passed, checks: report.checks },
                },
            )?;
            eprintln!(
                "validate-kernel: {} ({})",
                if passed { "all checks passed" } else { "checks FAILED" },
                path.display()
            );
            Ok(passed)
        }

        Command::Cubature { n, samples, trials } => {
            let seed = resolve_seed(cli.seed, 0)?;
            let mz = mz_check(n, samples, trials, seed)?;
            let mut residuals = Vec::with_capacity(trials);
            let mut l1 = Vec::with_capacity(trials);
            let mut l2_sq = Vec::with_capacity(trials);
            for trial in 0..trials {
                let pts = sample_design(
                    SamplingDesign::Uniform,
                    samples,
                    derive_seed(seed, &[0x6375_6261, trial as u64]),
                );
                let cw = cubature_weights(&pts, n, CubatureTarget::SurfaceMeasure)?;
                residuals.push(cw.residual);
                l1.push(cw.l1_norm());
                l2_sq.push(cw.l2_norm_sq());
            }
            let median = |v: &[f64]| -> f64 {
                let mut v = v.to_vec();
                v.sort_by(f64::total_cmp);
                v[v.len() / 2]
            };
            #[derive(Serialize)]
            struct Config {
                n: usize,
                samples: usize,
                trials: usize,
                seed: u64,
            }
            #[derive(Serialize)]
            struct Stats {
                max: f64,
                median: f64,
            }
            #[derive(Serialize)]
            struct WeightStats {
                l1_max: f64,
                l1_median: f64,
                l2_sq_median: f64,
            }
            #[derive(Serialize)]
            struct Payload {
                pass_frequency: f64,
                residual_stats: Stats,
                weight_norm_stats: WeightStats,
            }
            let payload = Payload {
                pass_frequency: mz.pass_fraction,
                residual_stats: Stats {
                    max: residuals.iter().cloned().fold(0.0, f64::max),
                    median: median(&residuals),
                },
                weight_norm_stats: WeightStats {
                    l1_max: l1.iter().cloned().fold(0.0, f64::max),
                    l1_median: median(&l1),
                    l2_sq_median: median(&l2_sq),
                },
            };
            let path = write_json(
                out,
                "cubature.json",
                &Report {
                    version: needlet::VERSION,
                    command: "cubature",
                    config: Config { n, samples, trials, seed },
                    payload,
                },
            )?;
            eprintln!("cubature: MZ pass frequency {:.3} ({})", mz.pass_fraction, path.display());
            Ok(true)
        }

        Command::Simulate { design, kappa, r, band, sigma, m, shape } => {
            let seed = resolve_seed(cli.seed, 0)?;
            let sampling = match design {
                DesignArg::Uniform => SamplingDesign::Uniform,
                DesignArg::CapBiased => SamplingDesign::CapBiased { kappa },
            };
            let target = make_target(r, band, derive_seed(seed, &[0x7461_7267]), shape.into())?;
            let trial_seed = derive_seed(seed, &[0x7472_6961, m as u64, 0]);
            let points = sample_design(sampling, m, trial_seed);
            let noise = if sigma > 0.0 { NoiseModel::Uniform { sigma } } else { NoiseModel::None };
            let (labels, m_bound) =
                generate_labels(&target, &points, noise, derive_seed(trial_seed, &[0x6e6f_6973]))?;
            let csv_path = write_dataset_csv(out, "dataset.csv", &points, &labels)?;

            #[derive(Serialize)]
            struct Config {
                design: DesignArg,
                kappa: f64,
                r: f64,
                band: usize,
                sigma: f64,
                m: usize,
                shape: ShapeArg,
                seed: u64,
            }
            #[derive(Serialize)]
            struct Payload {
                m_bound: f64,
                target_sup_norm: f64,
                target_l2_norm_sq: f64,
                design_distortion: f64,
                dataset: String,
            }
            let path = write_json(
                out,
                "simulate.json",
                &Report {
                    version: needlet::VERSION,
                    command: "simulate",
                    config: Config { design, kappa, r, band, sigma, m, shape, seed },
                    payload: Payload {
                        m_bound,
                        target_sup_norm: target.sup_norm(),
                        target_l2_norm_sq: target.l2_norm_sq(),
                        design_distortion: distortion(sampling)?,
                        dataset: csv_path.display().to_string(),
                    },
                },
            )?;
            eprintln!("simulate: wrote {m} rows ({})", path.display());
            Ok(true)
        }

        Command::Fit { method, q, lambda, n, truncate: clamp, data, window } => {
            let (points, labels) = output::read_dataset_csv(&data)?;
            let max_label = labels.iter().fold(0.0f64, |a, &y| a.max(y.abs()));
            let dataset = Dataset::new(points, labels, max_label.max(1e-12))?;
            let kernel = NeedletKernel::new(n, 2, make_window(window.into()))?;
            let fit = match method {
                MethodArg::Krr => krr_fit(&dataset, &kernel, lambda)?,
                MethodArg::Lq => lq_fit(&dataset, &kernel, lambda, q)?,
            };
            let fit = match clamp {
                Some(m_level) => truncate(&fit, m_level)?,
                None => fit,
            };

            #[derive(Serialize)]
            struct Config {
                method: MethodArg,
                q: f64,
                lambda: f64,
                n: usize,
                truncate: Option<f64>,
                data: String,
                window: WindowArg,
            }
            #[derive(Serialize)]
            struct Payload {
                n: usize,
                centers: Vec<Vec<f64>>,
                coeffs: Vec<f64>,
                #[serde(rename = "M")]
                m_level: Option<f64>,
                converged: bool,
                iterations: usize,
            }
            let path = write_json(
                out,
                "expansion.json",
                &Report {
                    version: needlet::VERSION,
                    command: "fit",
                    config: Config {
                        method,
                        q,
                        lambda,
                        n,
                        truncate: clamp,
                        data: data.display().to_string(),
                        window,
                    },
                    payload: Payload {
                        n,
                        centers: fit.centers().iter().map(|p| p.coords().to_vec()).collect(),
                        coeffs: fit.coeffs().to_vec(),
                        m_level: fit.truncation(),
                        converged: fit.info.converged,
                        iterations: fit.info.iterations,
                    },
                },
            )?;
            eprintln!(
                "fit: {} coefficients, {} nonzero ({})",
                fit.coeffs().len(),
                fit.nonzero_count(),
                path.display()
            );
            Ok(true)
        }

        Command::LearningCurve { config } => {
            let config = load_config(&config, cli.seed)?;
            let table = learning_curve(&config, cli.jobs.max(1))?;
            write_records_csv(out, "records.csv", table.records())?;

            #[derive(Serialize)]
            struct Payload<'a> {
                cells: &'a [needlet::harness::CurveCell],
                rate: Option<needlet::harness::RateFit>,
            }
            let rate = rate_fit(&table).ok();
            let path = write_json(
                out,
                "summary.json",
                &Report {
                    version: needlet::VERSION,
                    command: "learning-curve",
                    config: &config,
                    payload: Payload { cells: &table.cells, rate },
                },
            )?;
            eprintln!("learning-curve: {} cells ({})", table.cells.len(), path.display());
            Ok(true)
        }

        Command::SweepLambda { config, multipliers } => {
            let config = load_config(&config, cli.seed)?;
            let sweep = lambda_sweep(&config, &multipliers, cli.jobs.max(1))?;
            write_records_csv(out, "records.csv", sweep.tables.iter().flat_map(|t| t.records()))?;

            #[derive(Serialize)]
            struct Payload<'a> {
                multipliers: &'a [f64],
                ratios: &'a [Vec<f64>],
                tables: &'a [needlet::harness::CurveTable],
            }
            let path = write_json(
                out,
                "summary.json",
                &Report {
                    version: needlet::VERSION,
                    command: "sweep-lambda",
                    config: &config,
                    payload: Payload {
                        multipliers: &sweep.multipliers,
                        ratios: &sweep.ratios,
                        tables: &sweep.tables,
                    },
                },
            )?;
            eprintln!(
                "sweep-lambda: {} multipliers ({})",
                sweep.multipliers.len(),
                path.display()
            );
            Ok(true)
        }

        Command::SweepQ { config, q_values } => {
            let config = load_config(&config, cli.seed)?;
            let sweep = q_sweep(&config, &q_values, cli.jobs.max(1))?;
            write_records_csv(out, "records.csv", sweep.tables.iter().flat_map(|t| t.records()))?;

            #[derive(Serialize)]
            struct Payload<'a> {
                q_values: &'a [f64],
                max_pairwise_ratio: &'a [f64],
                median_nonzeros: &'a [Vec<f64>],
                tables: &'a [needlet::harness::CurveTable],
            }
            let path = write_json(
                out,
                "summary.json",
                &Report {
                    version: needlet::VERSION,
                    command: "sweep-q",
                    config: &config,
                    payload: Payload {
                        q_values: &sweep.q_values,
                        max_pairwise_ratio: &sweep.max_pairwise_ratio,
                        median_nonzeros: &sweep.median_nonzeros,
                        tables: &sweep.tables,
                    },
                },
            )?;
            eprintln!("sweep-q: {} q values ({})", sweep.q_values.len(), path.display());
            Ok(true)
        }

        Command::PhaseTransition { config, epsilon, epsilon_frac, m_grid, trials } => {
            let config = load_config(&config, cli.seed)?;
            let eps = match epsilon {
                Some(e) => e,
                None => epsilon_frac * config.target()?.l2_norm_sq(),
            };
            let grid = m_grid.unwrap_or_else(|| config.m_grid.clone());
            let trials = trials.unwrap_or(config.trials);
            let table = phase_transition(&config, eps, &grid, trials, cli.jobs.max(1))?;
            write_records_csv(
                out,
                "records.csv",
                table.rows.iter().flat_map(|r| r.records.iter()),
            )?;

            #[derive(Serialize)]
            struct Payload<'a> {
                epsilon: f64,
                n: usize,
                rows: &'a [needlet::harness::PhaseRow],
            }
            let path = write_json(
                out,
                "summary.json",
                &Report {
                    version: needlet::VERSION,
                    command: "phase-transition",
                    config: &config,
                    payload: Payload { epsilon: table.epsilon, n: table.n, rows: &table.rows },
                },
            )?;
            let probs: Vec<f64> = table.rows.iter().map(|r| r.failure_probability).collect();
            eprintln!("phase-transition: failure probabilities {probs:?} ({})", path.display());
            Ok(true)
        }
    }
}
