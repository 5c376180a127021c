//! Experiment orchestration: learning curves, rate-exponent fits, λ and q
//! sweeps, and phase-transition probability estimation.
//!
//! Every run is fully determined by its config and master seed: trial seeds
//! derive from (seed, m, trial index) only, so sweeps that vary λ or q reuse
//! identical datasets and comparisons are paired. Trials may execute on a
//! thread pool; records are sorted back into trial order so the output does
//! not depend on the schedule.

use crate::error::{Error, Result};
use crate::estimators::{
    krr_fit, lq_fit, paired_errors, truncate, Dataset, EvaluationGrid, KernelExpansion,
};
use crate::kernel::NeedletKernel;
use crate::seed::derive_seed;
use crate::simulation::{
    generate_labels, make_target, sample_design, NoiseModel, SamplingDesign, SobolevTarget,
    TargetShape,
};
use crate::window::WindowProfile;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

const TAG_TARGET: u64 = 0x7461_7267;
const TAG_TRIAL: u64 = 0x7472_6961;
const TAG_NOISE: u64 = 0x6e6f_6973;

/// Fitting method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Krr,
    Lq,
}

/// The regularization rule coupling λ to the accuracy target ε:
/// `scaled(c)` means λ = c·M⁻²·ε for KRR and λ = c·m^{q-1}·ε for l^q.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    Zero,
    Scaled { c: f64 },
}

impl LambdaRule {
    fn lambda(&self, method: FitMethod, q: f64, m: usize, epsilon: f64, m_bound: f64) -> f64 {
        match self {
            LambdaRule::Zero => 0.0,
            LambdaRule::Scaled { c } => match method {
                FitMethod::Krr => c * epsilon / (m_bound * m_bound),
                FitMethod::Lq => c * (m as f64).powf(q - 1.0) * epsilon,
            },
        }
    }
}

fn default_band() -> usize {
    32
}

fn default_c0() -> f64 {
    2.0
}

fn default_q() -> f64 {
    2.0
}

fn default_d() -> usize {
    2
}

/// Full description of one experiment family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_d")]
    pub d: usize,
    pub r: f64,
    #[serde(default)]
    pub design: SamplingDesign,
    #[serde(default)]
    pub sigma: f64,
    pub method: FitMethod,
    #[serde(default = "default_q")]
    pub q: f64,
    pub lambda_rule: LambdaRule,
    /// Coefficient in the frequency rule n = ⌊c₀ ε^{-1/(2r)}⌋.
    #[serde(default = "default_c0")]
    pub c0: f64,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_band")]
    pub target_band: usize,
    #[serde(default)]
    pub target_shape: TargetShape,
    #[serde(default)]
    pub window: WindowProfile,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d != 2 {
            return Err(Error::InvalidConfig("experiments run on S² (d = 2)".into()));
        }
        if !(self.r > 1.0) {
            return Err(Error::InvalidConfig("smoothness r must exceed d/2 = 1".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidConfig("noise level must be nonnegative".into()));
        }
        if self.m_grid.is_empty() || self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("m grid must be nonempty and strictly increasing".into()));
        }
        if self.trials < 5 {
            return Err(Error::InvalidConfig("need at least 5 trials per cell".into()));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::InvalidConfig("frequency coefficient c0 must be positive".into()));
        }
        if self.method == FitMethod::Lq {
            if !(self.q > 0.0 && self.q <= 2.0) {
                return Err(Error::InvalidConfig(format!("q = {} outside (0, 2]", self.q)));
            }
            if self.lambda_rule == LambdaRule::Zero {
                return Err(Error::InvalidConfig("l^q fits need a positive λ rule".into()));
            }
        }
        if self.target_band < 1 {
            return Err(Error::InvalidConfig("target band must be at least 1".into()));
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseModel {
        if self.sigma > 0.0 {
            NoiseModel::Uniform { sigma: self.sigma }
        } else {
            NoiseModel::None
        }
    }

    /// Accuracy target driving the n- and λ-rules at sample size m:
    /// the theoretical rate m^{-2r/(2r+d)}.
    pub fn epsilon_for(&self, m: usize) -> f64 {
        (m as f64).powf(-2.0 * self.r / (2.0 * self.r + self.d as f64))
    }

    /// The shared ground-truth target of this experiment family.
    pub fn target(&self) -> Result<SobolevTarget> {
        make_target(
            self.r,
            self.target_band,
            derive_seed(self.seed, &[TAG_TARGET]),
            self.target_shape,
        )
    }
}

/// Frequency choice ⌊c₀ ε^{-1/(2r)}⌋ clamped into [1, 128].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FrequencyChoice {
    pub n: usize,
    pub clamped: bool,
}

pub fn choose_n(epsilon: f64, r: f64, c0: f64) -> FrequencyChoice {
    assert!(epsilon > 0.0 && r > 1.0 && c0 > 0.0);
    let raw = (c0 * epsilon.powf(-1.0 / (2.0 * r))).floor();
    if raw < 1.0 {
        FrequencyChoice { n: 1, clamped: true }
    } else if raw > 128.0 {
        FrequencyChoice { n: 128, clamped: true }
    } else {
        FrequencyChoice { n: raw as usize, clamped: false }
    }
}

/// One completed (m, seed) trial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub m: usize,
    pub seed: u64,
    pub n: usize,
    pub lambda: f64,
    /// Penalty exponent for l^q fits; None for KRR.
    pub q: Option<f64>,
    /// ‖π_M f - f_ρ‖²_ρ, the truncated-estimator test error.
    pub error: f64,
    /// Same fit without clamping, for the truncation-dominance invariant.
    pub error_untruncated: f64,
    /// Coefficients above 1e-8 in magnitude.
    pub nonzeros: usize,
    pub wall_ms: f64,
}

/// Aggregates of one m-cell.
#[derive(Clone, Debug, Serialize)]
pub struct CurveCell {
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    pub median_error: f64,
    pub iqr: f64,
    /// Cell is valid when at least 80% of its trials succeeded.
    pub valid: bool,
    pub failures: usize,
    /// Raw records; written to CSV by consumers, omitted from JSON summaries.
    #[serde(skip_serializing)]
    pub records: Vec<ExperimentRecord>,
}

/// A learning curve: one cell per m in the grid.
#[derive(Clone, Debug, Serialize)]
pub struct CurveTable {
    pub cells: Vec<CurveCell>,
}

impl CurveTable {
    pub fn records(&self) -> impl Iterator<Item = &ExperimentRecord> {
        self.cells.iter().flat_map(|c| c.records.iter())
    }

    pub fn median_for(&self, m: usize) -> Option<f64> {
        self.cells.iter().find(|c| c.m == m && c.valid).map(|c| c.median_error)
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

struct TrialPlan<'a> {
    config: &'a ExperimentConfig,
    target: &'a SobolevTarget,
    grid: &'a EvaluationGrid,
    m: usize,
    n: usize,
    epsilon: f64,
}

fn run_trial(plan: &TrialPlan<'_>, trial: usize) -> Result<ExperimentRecord> {
    let cfg = plan.config;
    let start = Instant::now();
    let trial_seed = derive_seed(cfg.seed, &[TAG_TRIAL, plan.m as u64, trial as u64]);
    let x = sample_design(cfg.design, plan.m, trial_seed);
    let (y, m_bound) = generate_labels(
        plan.target,
        &x,
        cfg.noise(),
        derive_seed(trial_seed, &[TAG_NOISE]),
    )?;
    let data = Dataset::new(x, y, m_bound)?;
    let kernel = NeedletKernel::new(plan.n, cfg.d, crate::window::make_window(cfg.window))?;
    let lambda = cfg
        .lambda_rule
        .lambda(cfg.method, cfg.q, plan.m, plan.epsilon, m_bound);
    let fit: KernelExpansion = match cfg.method {
        FitMethod::Krr => krr_fit(&data, &kernel, lambda)?,
        FitMethod::Lq => lq_fit(&data, &kernel, lambda, cfg.q)?,
    };
    let clamped = truncate(&fit, m_bound)?;
    let (error, error_untruncated) = paired_errors(&clamped, plan.target.spectral(), plan.grid)?;
    Ok(ExperimentRecord {
        m: plan.m,
        seed: trial_seed,
        n: plan.n,
        lambda,
        q: match cfg.method {
            FitMethod::Krr => None,
            FitMethod::Lq => Some(cfg.q),
        },
        error,
        error_untruncated,
        nonzeros: clamped.nonzero_count(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn run_cell(plan: &TrialPlan<'_>, trials: usize, jobs: usize) -> CurveCell {
    let outcomes: Vec<Result<ExperimentRecord>> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| (0..trials).into_par_iter().map(|t| run_trial(plan, t)).collect())
    } else {
        (0..trials).map(|t| run_trial(plan, t)).collect()
    };

    let mut records = Vec::with_capacity(trials);
    let mut failures = 0;
    for outcome in outcomes {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(_) => failures += 1,
        }
    }
    let mut errors: Vec<f64> = records.iter().map(|r| r.error).collect();
    errors.sort_by(f64::total_cmp);
    let (median, iqr) = if errors.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            quantile(&errors, 0.5),
            quantile(&errors, 0.75) - quantile(&errors, 0.25),
        )
    };
    CurveCell {
        m: plan.m,
        n: plan.n,
        epsilon: plan.epsilon,
        median_error: median,
        iqr,
        valid: records.len() * 5 >= trials * 4,
        failures,
        records,
    }
}

/// Runs the full (data, fit, error) pipeline over the m-grid with ε set
/// self-consistently to the target rate m^{-2r/(2r+d)}.
pub fn learning_curve(config: &ExperimentConfig, jobs: usize) -> Result<CurveTable> {
    config.validate()?;
    let target = config.target()?;
    let mut grids: BTreeMap<usize, EvaluationGrid> = BTreeMap::new();
    let mut cells = Vec::with_capacity(config.m_grid.len());
    for &m in &config.m_grid {
        let epsilon = config.epsilon_for(m);
        let n = choose_n(epsilon, config.r, config.c0).n;
        let band = (2 * n - 1).max(config.target_band);
        let grid = match grids.entry(band) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(EvaluationGrid::new(band)?),
        };
        let plan = TrialPlan { config, target: &target, grid, m, n, epsilon };
        cells.push(run_cell(&plan, config.trials, jobs));
    }
    Ok(CurveTable { cells })
}

/// Ordinary least squares of log(median error) on log(m).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width on the slope.
    pub half_width: f64,
}

/// Two-sided 97.5% Student-t quantiles for df = 1..=30; 1.96 beyond.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

pub fn rate_fit(table: &CurveTable) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = table
        .cells
        .iter()
        .filter(|c| c.valid && c.median_error > 0.0)
        .map(|c| ((c.m as f64).ln(), c.median_error.ln()))
        .collect();
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 4 valid cells, have {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let df = points.len() - 2;
    let se = (ssr / df as f64 / sxx).sqrt();
    let t = if df == 0 {
        f64::INFINITY
    } else {
        *T_975.get(df - 1).unwrap_or(&1.96)
    };
    Ok(RateFit { slope, intercept, half_width: t * se })
}

/// λ-sweep output: one curve per multiplier plus ratios against c = 1.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaSweep {
    pub multipliers: Vec<f64>,
    pub tables: Vec<CurveTable>,
    /// `ratios[i][j]` = median(multiplier i, m_j) / median(c = 1, m_j).
    pub ratios: Vec<Vec<f64>>,
}

/// Runs the learning curve per λ-multiplier (c = 0 meaning pure least
/// squares) and reports median-error ratios against the c = 1 baseline.
/// Datasets are shared across multipliers, so the comparisons are paired.
pub fn lambda_sweep(
    config: &ExperimentConfig,
    multipliers: &[f64],
    jobs: usize,
) -> Result<LambdaSweep> {
    if config.method != FitMethod::Krr {
        return Err(Error::InvalidConfig("λ sweep applies to KRR".into()));
    }
    let mut all: Vec<f64> = multipliers.to_vec();
    if !all.contains(&1.0) {
        all.push(1.0);
    }
    let mut tables = Vec::with_capacity(all.len());
    for &c in &all {
        let mut cfg = config.clone();
        cfg.lambda_rule = if c == 0.0 { LambdaRule::Zero } else { LambdaRule::Scaled { c } };
        tables.push(learning_curve(&cfg, jobs)?);
    }
    let baseline_idx = all.iter().position(|&c| c == 1.0).expect("baseline inserted");
    let ratios = tables
        .iter()
        .map(|t| {
            config
                .m_grid
                .iter()
                .map(|&m| {
                    let base = tables[baseline_idx].median_for(m).unwrap_or(f64::NAN);
                    t.median_for(m).map(|v| v / base).unwrap_or(f64::NAN)
                })
                .collect()
        })
        .collect();
    Ok(LambdaSweep { multipliers: all, tables, ratios })
}

/// q-sweep output: per-q curves, pairwise worst ratios, and sparsity medians.
#[derive(Clone, Debug, Serialize)]
pub struct QSweep {
    pub q_values: Vec<f64>,
    pub tables: Vec<CurveTable>,
    /// `max_pairwise_ratio[j]` over the q values at `m_grid[j]`.
    pub max_pairwise_ratio: Vec<f64>,
    /// median nonzero-coefficient count per (q, m).
    pub median_nonzeros: Vec<Vec<f64>>,
}

/// Runs the learning curve per q with the per-q rule λ = c·m^{q-1}·ε.
pub fn q_sweep(config: &ExperimentConfig, q_values: &[f64], jobs: usize) -> Result<QSweep> {
    if config.method != FitMethod::Lq {
        return Err(Error::InvalidConfig("q sweep applies to l^q fits".into()));
    }
    if q_values.is_empty() {
        return Err(Error::InvalidConfig("q sweep needs at least one q".into()));
    }
    let mut tables = Vec::with_capacity(q_values.len());
    let mut nonzeros = Vec::with_capacity(q_values.len());
    for &q in q_values {
        let mut cfg = config.clone();
        cfg.q = q;
        let table = learning_curve(&cfg, jobs)?;
        let per_m: Vec<f64> = table
            .cells
            .iter()
            .map(|cell| {
                let mut counts: Vec<f64> =
                    cell.records.iter().map(|r| r.nonzeros as f64).collect();
                counts.sort_by(f64::total_cmp);
                if counts.is_empty() { f64::NAN } else { quantile(&counts, 0.5) }
            })
            .collect();
        tables.push(table);
        nonzeros.push(per_m);
    }
    let max_pairwise_ratio = config
        .m_grid
        .iter()
        .map(|&m| {
            let medians: Vec<f64> =
                tables.iter().filter_map(|t| t.median_for(m)).collect();
            let mut worst: f64 = 1.0;
            for a in &medians {
                for b in &medians {
                    if *b > 0.0 {
                        worst = worst.max(a / b);
                    }
                }
            }
            worst
        })
        .collect();
    Ok(QSweep { q_values: q_values.to_vec(), tables, max_pairwise_ratio, median_nonzeros: nonzeros })
}

/// Empirical failure probabilities P(error > ε) at a fixed accuracy ε.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseRow {
    pub m: usize,
    pub failures: usize,
    pub trials: usize,
    pub failure_probability: f64,
    #[serde(skip_serializing)]
    pub records: Vec<ExperimentRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseTable {
    pub epsilon: f64,
    pub n: usize,
    pub rows: Vec<PhaseRow>,
}

/// Fixed-ε failure probability across the m-grid: n and λ follow the rules
/// for the given ε, and each m gets `trials` fresh datasets.
pub fn phase_transition(
    config: &ExperimentConfig,
    epsilon: f64,
    m_grid: &[usize],
    trials: usize,
    jobs: usize,
) -> Result<PhaseTable> {
    config.validate()?;
    if trials < 50 {
        return Err(Error::InvalidConfig("phase transition needs at least 50 trials".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("accuracy ε must be positive".into()));
    }
    if m_grid.is_empty() || m_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("m grid must be nonempty and strictly increasing".into()));
    }
    let target = config.target()?;
    let n = choose_n(epsilon, config.r, config.c0).n;
    let band = (2 * n - 1).max(config.target_band);
    let grid = EvaluationGrid::new(band)?;
    let mut rows = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let plan = TrialPlan { config, target: &target, grid: &grid, m, n, epsilon };
        let cell = run_cell(&plan, trials, jobs);
        let failures = cell.records.iter().filter(|r| r.error > epsilon).count();
        let denom = cell.records.len().max(1);
        rows.push(PhaseRow {
            m,
            failures,
            trials: cell.records.len(),
            failure_probability: failures as f64 / denom as f64,
            records: cell.records,
        });
    }
    Ok(PhaseTable { epsilon, n, rows })
}

/// Empirical approximation-error decay: ‖f - K_n*f‖_ρ against n, with the
/// fitted log-log slope. Reported as a diagnostic; the uniform- vs L²-norm
/// reading of the Jackson rate is left to the table.
#[derive(Clone, Debug, Serialize)]
pub struct JacksonCurve {
    pub rows: Vec<(usize, f64)>,
    pub exponent: f64,
}

pub fn jackson_curve(r: f64, band: usize, n_grid: &[usize], seed: u64) -> Result<JacksonCurve> {
    let target = make_target(r, band, seed, TargetShape::Random)?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let kernel = NeedletKernel::new(n, 2, crate::window::AdmissibleWindow::smooth_bump())?;
        let approx = kernel.convolve(target.spectral());
        let err = approx.l2_distance_sq(target.spectral()).sqrt();
        rows.push((n, err));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("Jackson fit needs two positive errors".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(JacksonCurve { rows, exponent: sxy / sxx })
}
