//! Experiment driver: builds a target, runs the samplers and writes result files.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arwm::run_arwm;
use crate::data_io::{load_boston, load_cpi};
use crate::diagnostics::{acceptance_window, relative_inefficiency, trend_slope, EfficiencyReport};
use crate::error::{invalid, Error, Result};
use crate::mixture::{GaussianComponent, MixtureOfNormals};
use crate::sampler::{init_proposal_laplace, run_chain, AimhConfig, Phase, ProposalState, RunReport};
use crate::targets::{
    laplace_approx, semiparam_synthetic, toy_mixture_15d, toy_mixture_1d, tvp_synthetic, LaplaceResult,
    SemiparamModel, TargetModel, TauPrior, TvpAr1Model, DEFAULT_KNOTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Toy1d,
    Toy15d,
    Tvp,
    Semiparam,
}

impl ExperimentKind {
    pub fn default_iterations(self) -> usize {
        match self {
            ExperimentKind::Toy1d => 15_000,
            ExperimentKind::Toy15d => 35_000,
            ExperimentKind::Tvp | ExperimentKind::Semiparam => 20_000,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "toy1d" => Ok(Self::Toy1d),
            "toy15d" => Ok(Self::Toy15d),
            "tvp" => Ok(Self::Tvp),
            "semiparam" => Ok(Self::Semiparam),
            other => Err(invalid(format!("experiment: unknown value {other:?} (toy1d, toy15d, tvp, semiparam)"))),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Toy1d => "toy1d",
            Self::Toy15d => "toy15d",
            Self::Tvp => "tvp",
            Self::Semiparam => "semiparam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerChoice {
    Aimh,
    Arwm,
    Both,
}

impl FromStr for SamplerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aimh" => Ok(Self::Aimh),
            "arwm" => Ok(Self::Arwm),
            "both" => Ok(Self::Both),
            other => Err(invalid(format!("sampler: unknown value {other:?} (aimh, arwm, both)"))),
        }
    }
}

/// How the cost of one iteration enters the relative inefficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingMode {
    /// Measured wall-clock seconds per iteration.
    Wall,
    /// Every iteration costs 1; makes all outputs reproducible byte for byte.
    Unit,
}

impl FromStr for TimingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wall" => Ok(Self::Wall),
            "unit" => Ok(Self::Unit),
            other => Err(invalid(format!("timing: unknown value {other:?} (wall, unit)"))),
        }
    }
}

pub fn parse_tau_prior(s: &str) -> Result<TauPrior> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "lognormal" | "log_normal" => Ok(TauPrior::LogNormal),
        "inverse_gamma" | "inversegamma" | "ig" => Ok(TauPrior::InverseGamma),
        other => Err(invalid(format!("prior: unknown value {other:?} (lognormal, inverse_gamma)"))),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub sampler: SamplerChoice,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub aimh: AimhConfig,
    pub data: Option<PathBuf>,
    /// Use a simulated dataset when `data` is absent.
    pub synthetic: bool,
    pub out_dir: PathBuf,
    pub prior: TauPrior,
    pub timing: TimingMode,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            sampler: SamplerChoice::Aimh,
            iterations: experiment.default_iterations(),
            burn_in: 0,
            seed,
            aimh: AimhConfig::default(),
            data: None,
            synthetic: false,
            out_dir: out_dir.into(),
            prior: TauPrior::LogNormal,
            timing: TimingMode::Wall,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(invalid(format!(
                "iterations: must exceed burn_in ({} <= {})",
                self.iterations, self.burn_in
            )));
        }
        self.aimh.validate()
    }
}

/// Outcome of the empirical dominance and diminishing-adaptation checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Warn => "WARN",
            Verdict::Indeterminate => "INDETERMINATE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub verdict: Verdict,
    pub dominance_max: Vec<f64>,
    pub diminishing: Vec<f64>,
    pub diminishing_slope: f64,
    pub message: String,
}

/// Relative spread allowed among the last three dominance maxima.
pub const DOMINANCE_STABILITY: f64 = 0.10;

/// Checks the refit log. Only refits made after the last change of `g₀` (the strict
/// phase, when there is one) are comparable, so those are used.
pub fn validate_monitors(report: &RunReport) -> MonitorVerdict {
    let strict: Vec<_> = report.refit_log.iter().filter(|e| e.phase == Phase::Strict).collect();
    let events: Vec<_> = if strict.is_empty() { report.refit_log.iter().collect() } else { strict };
    let dominance_max: Vec<f64> = events.iter().map(|e| e.dominance_max).collect();
    let diminishing: Vec<f64> = events.iter().map(|e| e.diminishing).collect();
    let diminishing_slope = trend_slope(&diminishing);
    if events.len() < 3 {
        return MonitorVerdict {
            verdict: Verdict::Indeterminate,
            dominance_max,
            diminishing,
            diminishing_slope,
            message: format!("only {} comparable refits; need 3", events.len()),
        };
    }
    let last = &dominance_max[dominance_max.len() - 3..];
    let hi = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = last.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    let mut problems = Vec::new();
    if !(spread <= DOMINANCE_STABILITY) {
        problems.push(format!("dominance max-ratio not stable: last three {last:?}"));
    }
    if !(diminishing_slope <= 0.0) {
        problems.push(format!("diminishing estimates trend upward (slope {diminishing_slope:.3e}): {diminishing:?}"));
    }
    let (verdict, message) =
        if problems.is_empty() { (Verdict::Pass, "ok".to_string()) } else { (Verdict::Warn, problems.join("; ")) };
    MonitorVerdict { verdict, dominance_max, diminishing, diminishing_slope, message }
}

/// Target plus the starting information each sampler needs.
pub struct PreparedTarget {
    pub target: Box<dyn TargetModel + Send + Sync>,
    /// Initial AIMH proposal.
    pub aimh_init: ProposalState,
    /// Mode and covariance for the ARWM start.
    pub laplace: LaplaceResult,
    pub description: String,
}

fn laplace_for(target: &dyn TargetModel) -> Result<LaplaceResult> {
    let start = target.laplace_start().unwrap_or_else(|| DVector::zeros(target.dimension()));
    let lap = laplace_approx(target, &start)?;
    if !lap.converged {
        log::warn!("Newton-Raphson did not converge after {} iterations", lap.iterations);
    }
    Ok(lap)
}

fn missing_data(kind: ExperimentKind) -> Error {
    Error::Data(format!("experiment {kind} needs a data file (--data) or the synthetic fallback (--synthetic)"))
}

/// Builds the target and initial proposals for `cfg`.
pub fn prepare_target(cfg: &ExperimentConfig) -> Result<PreparedTarget> {
    let (target, description): (Box<dyn TargetModel + Send + Sync>, String) = match cfg.experiment {
        ExperimentKind::Toy1d => (Box::new(toy_mixture_1d()), "three-component univariate normal mixture".into()),
        ExperimentKind::Toy15d => (Box::new(toy_mixture_15d()), "15-dimensional normal mixture".into()),
        ExperimentKind::Tvp => match (&cfg.data, cfg.synthetic) {
            (Some(path), _) => {
                let series = load_cpi(path)?;
                (Box::new(TvpAr1Model::new(series.inflation)?), format!("TVP-AR(1) on {}", path.display()))
            }
            (None, true) => {
                let s = tvp_synthetic(150, 1.0, 0.0, 0.002, 0.5, 0.6, cfg.seed ^ 0xda7a)?;
                (Box::new(TvpAr1Model::new(s.y)?), "TVP-AR(1) on a simulated series (T=150)".into())
            }
            (None, false) => return Err(missing_data(cfg.experiment)),
        },
        ExperimentKind::Semiparam => match (&cfg.data, cfg.synthetic) {
            (Some(path), _) => {
                let b = load_boston(path)?;
                let model =
                    SemiparamModel::new(b.response.clone(), &b.linear, &b.flexible, &b.flexible_names, cfg.prior, DEFAULT_KNOTS)?;
                (Box::new(model), format!("additive model on {}", path.display()))
            }
            (None, true) => {
                let (y, linear, flexible) = semiparam_synthetic(300, cfg.seed ^ 0xda7a);
                let names = vec!["x1".to_string(), "x2".to_string()];
                let model = SemiparamModel::new(y, &linear, &flexible, &names, cfg.prior, DEFAULT_KNOTS)?;
                (Box::new(model), "additive model on simulated data (n=300, H=2)".into())
            }
            (None, false) => return Err(missing_data(cfg.experiment)),
        },
    };
    let laplace = laplace_for(target.as_ref())?;
    let aimh_init = match cfg.experiment {
        // the fixed starting proposal φ(z; −5, 4)
        ExperimentKind::Toy1d => ProposalState::new(MixtureOfNormals::univariate(&[(1.0, -5.0, 4.0)])?, &cfg.aimh.proposal)?,
        _ => init_proposal_laplace(&laplace.mode, &laplace.neg_inv_hessian, &cfg.aimh.proposal)?,
    };
    Ok(PreparedTarget { target, aimh_init, laplace, description })
}

/// A finished sampler run with its timing.
#[derive(Debug, Clone)]
pub struct TimedRun {
    pub report: RunReport,
    pub seconds: f64,
}

fn timed<F: FnOnce() -> Result<RunReport>>(f: F) -> Result<TimedRun> {
    let t = Instant::now();
    let report = f()?;
    Ok(TimedRun { report, seconds: t.elapsed().as_secs_f64() })
}

/// Seeds of the two chains; distinct streams derived from the run seed.
pub fn sampler_seeds(seed: u64) -> (u64, u64) {
    (seed, seed ^ 0x9e37_79b9_7f4a_7c15)
}

/// Runs the configured samplers; with `Both` the two chains run concurrently.
pub fn run_samplers(cfg: &ExperimentConfig, prepared: &PreparedTarget) -> Result<Vec<TimedRun>> {
    let (seed_a, seed_b) = sampler_seeds(cfg.seed);
    let target = prepared.target.as_ref();
    let aimh = || {
        timed(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_a);
            run_chain(target, prepared.aimh_init.clone(), cfg.iterations, &cfg.aimh, None, &mut rng)
        })
    };
    let arwm = || {
        timed(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_b);
            run_arwm(
                target,
                prepared.laplace.mode.clone(),
                prepared.laplace.neg_inv_hessian.clone(),
                cfg.iterations,
                &mut rng,
            )
        })
    };
    match cfg.sampler {
        SamplerChoice::Aimh => Ok(vec![aimh()?]),
        SamplerChoice::Arwm => Ok(vec![arwm()?]),
        SamplerChoice::Both => std::thread::scope(|s| {
            let ha = s.spawn(aimh);
            let hb = s.spawn(arwm);
            let a = ha.join().map_err(|_| Error::Numerical("AIMH thread panicked".into()))?;
            let b = hb.join().map_err(|_| Error::Numerical("ARWM thread panicked".into()))?;
            Ok(vec![a?, b?])
        }),
    }
}

/// Inefficiency of one run over its inference draws.
pub fn efficiency_of(run: &TimedRun, burn_in: usize, timing: TimingMode) -> Result<EfficiencyReport> {
    let start = run.report.inference_start(burn_in);
    let n = run.report.iterations() - start;
    let cost = match timing {
        TimingMode::Unit => 1.0,
        TimingMode::Wall => (run.seconds / run.report.iterations() as f64).max(1e-12),
    };
    if n < 100 {
        return Err(Error::Data(format!(
            "{}: only {n} draws after burn-in and the loose phase; IACT needs 100",
            run.report.sampler
        )));
    }
    EfficiencyReport::from_draws(&run.report.sampler, run.report.parameter_names.clone(), &run.report.draws[start..], cost)
}

#[derive(Debug, Clone, Serialize)]
struct ReportFile<'a> {
    experiment: ExperimentKind,
    description: &'a str,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    runs: Vec<RunSummary<'a>>,
}

#[derive(Debug, Clone, Serialize)]
struct RunSummary<'a> {
    inference_start: usize,
    posterior_mean: Vec<f64>,
    acceptance_rate: f64,
    monitors: Option<MonitorVerdict>,
    report: &'a RunReport,
}

fn posterior_mean(report: &RunReport, from: usize) -> Vec<f64> {
    let d = report.parameter_names.len();
    let n = (report.draws.len() - from).max(1) as f64;
    let mut m = vec![0.0; d];
    for x in &report.draws[from..] {
        for (mi, xi) in m.iter_mut().zip(x) {
            *mi += xi / n;
        }
    }
    m
}

/// Names of the files written by [`run_experiment`].
pub const OUTPUT_FILES: [&str; 5] =
    ["run_report.json", "efficiency.csv", "acceptance_trace.csv", "monitors.csv", "density_grid.csv"];

/// Window of the rolling acceptance rate in `acceptance_trace.csv`.
pub const ACCEPTANCE_WINDOW: usize = 500;

/// Points per parameter in `density_grid.csv`.
pub const DENSITY_GRID_POINTS: usize = 400;

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<TimedRun>,
    pub efficiency: Vec<EfficiencyReport>,
    pub monitors: Option<MonitorVerdict>,
    pub files: Vec<PathBuf>,
}

/// Runs the experiment and writes the five result files into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let prepared = prepare_target(cfg)?;
    log::info!("{}: {}", cfg.experiment, prepared.description);
    let runs = run_samplers(cfg, &prepared)?;
    let efficiency = runs.iter().map(|r| efficiency_of(r, cfg.burn_in, cfg.timing)).collect::<Result<Vec<_>>>()?;
    let monitors = runs.iter().find(|r| r.report.sampler == "aimh").map(|r| validate_monitors(&r.report));

    fs::create_dir_all(&cfg.out_dir)?;
    let path = |name: &str| cfg.out_dir.join(name);
    let file = ReportFile {
        experiment: cfg.experiment,
        description: &prepared.description,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
        runs: runs
            .iter()
            .map(|r| {
                let from = r.report.inference_start(cfg.burn_in);
                RunSummary {
                    inference_start: from,
                    posterior_mean: posterior_mean(&r.report, from),
                    acceptance_rate: r.report.acceptance_rate(from..r.report.iterations()),
                    monitors: (r.report.sampler == "aimh").then(|| validate_monitors(&r.report)),
                    report: &r.report,
                }
            })
            .collect(),
    };
    fs::write(path(OUTPUT_FILES[0]), serde_json::to_string_pretty(&file)?)?;
    write_efficiency(&path(OUTPUT_FILES[1]), &efficiency)?;
    write_acceptance_trace(&path(OUTPUT_FILES[2]), &runs)?;
    write_monitors(&path(OUTPUT_FILES[3]), &runs)?;
    write_density_grid(&path(OUTPUT_FILES[4]), prepared.target.as_ref(), &runs, cfg.burn_in)?;
    Ok(ExperimentOutcome { runs, efficiency, monitors, files: OUTPUT_FILES.iter().map(|f| path(f)).collect() })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Columns: parameter, iact_aimh, iact_arwm, cost_aimh, cost_arwm, relative_inefficiency.
/// The last row, `mean`, averages each column. Cells of an absent sampler are empty.
pub fn write_efficiency(path: &Path, reports: &[EfficiencyReport]) -> Result<()> {
    let aimh = reports.iter().find(|r| r.sampler == "aimh");
    let arwm = reports.iter().find(|r| r.sampler == "arwm");
    let rel = match (aimh, arwm) {
        (Some(a), Some(b)) => Some(relative_inefficiency(b, a)?),
        _ => None,
    };
    let names = reports.first().map(|r| r.parameter_names.clone()).unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "iact_aimh", "iact_arwm", "cost_aimh", "cost_arwm", "relative_inefficiency"])?;
    for (j, name) in names.iter().enumerate() {
        w.write_record([
            name.clone(),
            fmt_opt(aimh.map(|r| r.iact[j])),
            fmt_opt(arwm.map(|r| r.iact[j])),
            fmt_opt(aimh.map(|r| r.runtime_per_iteration)),
            fmt_opt(arwm.map(|r| r.runtime_per_iteration)),
            fmt_opt(rel.as_ref().map(|r| r.per_parameter[j])),
        ])?;
    }
    w.write_record([
        "mean".to_string(),
        fmt_opt(aimh.map(|r| r.mean_iact())),
        fmt_opt(arwm.map(|r| r.mean_iact())),
        fmt_opt(aimh.map(|r| r.runtime_per_iteration)),
        fmt_opt(arwm.map(|r| r.runtime_per_iteration)),
        fmt_opt(rel.as_ref().map(|r| r.mean)),
    ])?;
    w.flush()?;
    Ok(())
}

/// Columns: sampler, iteration, alpha, accepted, rolling_acceptance.
pub fn write_acceptance_trace(path: &Path, runs: &[TimedRun]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sampler", "iteration", "alpha", "accepted", "rolling_acceptance"])?;
    for r in runs {
        let rolling = acceptance_window(&r.report.accepted, ACCEPTANCE_WINDOW);
        for (i, (a, acc)) in r.report.alpha_trace.iter().zip(&r.report.accepted).enumerate() {
            w.write_record([
                r.report.sampler.clone(),
                (i + 1).to_string(),
                a.to_string(),
                (*acc as u8).to_string(),
                rolling[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns: sampler, refit, iteration, phase, reason, component_count, bic, beta,
/// dominance_max, diminishing.
pub fn write_monitors(path: &Path, runs: &[TimedRun]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sampler",
        "refit",
        "iteration",
        "phase",
        "reason",
        "component_count",
        "bic",
        "beta",
        "dominance_max",
        "diminishing",
    ])?;
    for r in runs {
        for (k, e) in r.report.refit_log.iter().enumerate() {
            w.write_record([
                r.report.sampler.clone(),
                (k + 1).to_string(),
                e.iteration.to_string(),
                format!("{:?}", e.phase).to_lowercase(),
                format!("{:?}", e.reason).to_lowercase(),
                e.component_count.to_string(),
                fmt_opt(e.bic),
                e.beta.to_string(),
                e.dominance_max.to_string(),
                e.diminishing.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Evenly spaced grid covering the draws, widened by 10% of their range on each side.
pub fn marginal_grid(values: &[f64], points: usize) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo).max(1e-6);
    let (a, b) = (lo - pad, hi + pad);
    (0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect()
}

/// Histogram density of `values` at the cells of `grid` (each grid point is a cell centre).
pub fn histogram_density(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let h = grid[1] - grid[0];
    let start = grid[0] - h / 2.0;
    let mut counts = vec![0usize; grid.len()];
    for v in values {
        let k = ((v - start) / h).floor();
        if k >= 0.0 && (k as usize) < grid.len() {
            counts[k as usize] += 1;
        }
    }
    let n = values.len().max(1) as f64;
    counts.iter().map(|&c| c as f64 / (n * h)).collect()
}

/// Columns: sampler, parameter, z, target_density, proposal_density, sample_density.
/// `target_density` is empty when the target has no closed-form marginal;
/// `proposal_density` is empty for ARWM.
pub fn write_density_grid(path: &Path, target: &dyn TargetModel, runs: &[TimedRun], burn_in: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sampler", "parameter", "z", "target_density", "proposal_density", "sample_density"])?;
    for r in runs {
        let from = r.report.inference_start(burn_in);
        for (j, name) in r.report.parameter_names.iter().enumerate() {
            let col = r.report.column(j, from);
            if col.is_empty() {
                continue;
            }
            let grid = marginal_grid(&col, DENSITY_GRID_POINTS);
            let hist = histogram_density(&col, &grid);
            let marginal = match &r.report.final_proposal {
                Some(q) => Some(q.marginal(&[j])?),
                None => None,
            };
            for (z, hd) in grid.iter().zip(&hist) {
                w.write_record([
                    r.report.sampler.clone(),
                    name.clone(),
                    z.to_string(),
                    fmt_opt(target.marginal_log_density(j, *z).map(f64::exp)),
                    fmt_opt(marginal.as_ref().map(|m| m.log_density_unchecked(&[*z]).exp())),
                    hd.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Centres of [`three_blob_mixture`].
pub const THREE_BLOB_CENTERS: [[f64; 2]; 3] = [[-4.0, 0.0], [4.0, 0.0], [0.0, 5.0]];

/// Three well-separated bivariate unit-covariance blobs with equal weights.
pub fn three_blob_mixture() -> MixtureOfNormals {
    let comps = THREE_BLOB_CENTERS
        .iter()
        .map(|c| GaussianComponent::new(1.0 / 3.0, DVector::from_column_slice(c), DMatrix::identity(2, 2)))
        .collect::<Result<Vec<_>>>()
        .expect("fixed fixture is valid");
    MixtureOfNormals::from_unnormalized(comps).expect("fixed fixture is valid")
}

/// Series whose first `t_len / 2` observations follow a constant-coefficient AR(1) and
/// whose remaining observations have a random-walk slope (`λ₁² = lambda1_sq`).
pub fn tvp_regime_switch(t_len: usize, lambda1_sq: f64, seed: u64) -> Result<Vec<f64>> {
    let half = t_len / 2;
    let first = tvp_synthetic(half.max(10), 1.0, 0.0, 0.0, 0.5, 0.5, seed)?;
    let second = tvp_synthetic((t_len - half).max(10), 1.0, 0.0, lambda1_sq, 0.5, 0.5, seed.wrapping_add(1))?;
    let mut y = first.y;
    y.extend(second.y);
    Ok(y)
}
