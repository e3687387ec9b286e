use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use aimh::experiment::{
    parse_tau_prior, run_experiment, ExperimentConfig, ExperimentKind, SamplerChoice, TimingMode, OUTPUT_FILES,
};
use aimh::sampler::BetaPolicy;
use aimh::Error;
use clap::Parser;

const OUTPUT_HELP: &str = "\
Output files (written to --out):
  run_report.json       experiment, description, iterations, burn_in, seed and, per sampler,
                        inference_start, posterior_mean, acceptance_rate, monitors, report
  efficiency.csv        parameter, iact_aimh, iact_arwm, cost_aimh, cost_arwm,
                        relative_inefficiency (last row: mean); columns of a sampler that
                        was not run are empty
  acceptance_trace.csv  sampler, iteration, alpha, accepted, rolling_acceptance (window 500)
  monitors.csv          sampler, refit, iteration, phase, reason, component_count, bic, beta,
                        dominance_max, diminishing
  density_grid.csv      sampler, parameter, z, target_density, proposal_density, sample_density

Config file: one `key = value` per line, `#` starts a comment. Keys are the long flag
names without the leading dashes (e.g. `burn-in = 1000`). Command-line flags take precedence.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.";

/// Run an experiment with the adaptive independent Metropolis-Hastings sampler and/or the
/// adaptive random-walk Metropolis comparator.
#[derive(Parser, Debug)]
#[command(name = "aimh", version, after_long_help = OUTPUT_HELP)]
struct Cli {
    /// toy1d, toy15d, tvp or semiparam
    #[arg(long)]
    experiment: Option<String>,
    /// aimh, arwm or both
    #[arg(long)]
    sampler: Option<String>,
    /// Total iterations (default depends on the experiment)
    #[arg(long)]
    iterations: Option<String>,
    /// Leading iterations dropped from inference (default 0)
    #[arg(long)]
    burn_in: Option<String>,
    /// Random seed (required)
    #[arg(long)]
    seed: Option<String>,
    /// Dataset: monthly CPI levels for tvp, Boston housing CSV for semiparam
    #[arg(long)]
    data: Option<String>,
    /// Use a simulated dataset when --data is absent
    #[arg(long)]
    synthetic: bool,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Smoothing-variance prior for semiparam: lognormal or inverse_gamma
    #[arg(long)]
    prior: Option<String>,
    /// Weight of the defensive component
    #[arg(long)]
    omega1: Option<String>,
    /// Weight of the fattened copies
    #[arg(long)]
    omega2: Option<String>,
    /// Covariance multiplier of the fattened copies
    #[arg(long)]
    fatten_k: Option<String>,
    /// zero, or power:R for beta_n = 1 - n^-R in the strict phase
    #[arg(long)]
    beta_policy: Option<String>,
    /// Window L of the acceptance trigger
    #[arg(long)]
    trigger_window: Option<String>,
    /// Level of the acceptance trigger
    #[arg(long)]
    trigger_level: Option<String>,
    /// Window M of the loose-phase exit rule
    #[arg(long)]
    exit_window: Option<String>,
    /// Level of the loose-phase exit rule
    #[arg(long)]
    exit_level: Option<String>,
    /// Cost per iteration in the relative inefficiency: wall or unit
    #[arg(long)]
    timing: Option<String>,
    /// Key-value config file
    #[arg(long)]
    config: Option<PathBuf>,
}

const KEYS: [&str; 18] = [
    "experiment",
    "sampler",
    "iterations",
    "burn-in",
    "seed",
    "data",
    "synthetic",
    "out",
    "prior",
    "omega1",
    "omega2",
    "fatten-k",
    "beta-policy",
    "trigger-window",
    "trigger-level",
    "exit-window",
    "exit-level",
    "timing",
];

fn read_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("config: cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("config: line {} is not key = value", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!("config: unknown key {key:?} on line {}", n + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn field<T: FromStr>(name: &str, value: &str) -> Result<T, Error>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::InvalidInput(format!("{name}: {e} (got {value:?})")))
}

fn parse_beta(s: &str) -> Result<BetaPolicy, Error> {
    let s = s.trim().to_ascii_lowercase();
    if s == "zero" {
        return Ok(BetaPolicy::Zero);
    }
    match s.strip_prefix("power:").or_else(|| s.strip_prefix("power=")) {
        Some(r) => Ok(BetaPolicy::Power { r: field("beta-policy", r)? }),
        None => Err(Error::InvalidInput(format!("beta-policy: unknown value {s:?} (zero, power:R)"))),
    }
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, Error> {
    let file = match &cli.config {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    let flags: [(&str, Option<String>); 18] = [
        ("experiment", cli.experiment),
        ("sampler", cli.sampler),
        ("iterations", cli.iterations),
        ("burn-in", cli.burn_in),
        ("seed", cli.seed),
        ("data", cli.data),
        ("synthetic", cli.synthetic.then(|| "true".to_string())),
        ("out", cli.out),
        ("prior", cli.prior),
        ("omega1", cli.omega1),
        ("omega2", cli.omega2),
        ("fatten-k", cli.fatten_k),
        ("beta-policy", cli.beta_policy),
        ("trigger-window", cli.trigger_window),
        ("trigger-level", cli.trigger_level),
        ("exit-window", cli.exit_window),
        ("exit-level", cli.exit_level),
        ("timing", cli.timing),
    ];
    let mut v: BTreeMap<&str, String> = BTreeMap::new();
    for (k, flag) in flags {
        if let Some(val) = flag.or_else(|| file.get(k).cloned()) {
            v.insert(k, val);
        }
    }
    let get = |k: &str| v.get(k).map(String::as_str);

    let kind: ExperimentKind =
        get("experiment").ok_or_else(|| Error::InvalidInput("experiment: required".into()))?.parse()?;
    let seed: u64 = field("seed", get("seed").ok_or_else(|| Error::InvalidInput("seed: required".into()))?)?;
    let out = get("out").ok_or_else(|| Error::InvalidInput("out: required".into()))?;
    let mut cfg = ExperimentConfig::new(kind, seed, out);
    if let Some(s) = get("sampler") {
        cfg.sampler = s.parse::<SamplerChoice>()?;
    }
    if let Some(s) = get("iterations") {
        cfg.iterations = field("iterations", s)?;
    }
    if let Some(s) = get("burn-in") {
        cfg.burn_in = field("burn-in", s)?;
    }
    cfg.data = get("data").map(PathBuf::from);
    if let Some(s) = get("synthetic") {
        cfg.synthetic = field("synthetic", s)?;
    }
    if let Some(s) = get("prior") {
        cfg.prior = parse_tau_prior(s)?;
    }
    if let Some(s) = get("timing") {
        cfg.timing = s.parse::<TimingMode>()?;
    }
    let p = &mut cfg.aimh.proposal;
    if let Some(s) = get("omega1") {
        p.omega1 = field("omega1", s)?;
    }
    if let Some(s) = get("omega2") {
        p.omega2 = field("omega2", s)?;
    }
    if let Some(s) = get("fatten-k") {
        p.fatten_k = field("fatten-k", s)?;
    }
    if let Some(s) = get("beta-policy") {
        cfg.aimh.beta = parse_beta(s)?;
    }
    let sch = &mut cfg.aimh.schedule;
    if let Some(s) = get("trigger-window") {
        sch.trigger_window = field("trigger-window", s)?;
    }
    if let Some(s) = get("trigger-level") {
        sch.trigger_level = field("trigger-level", s)?;
    }
    if let Some(s) = get("exit-window") {
        sch.loose_exit_window = field("exit-window", s)?;
    }
    if let Some(s) = get("exit-level") {
        sch.loose_exit_level = field("exit-level", s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } => 2,
        Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
        Error::Numerical(_) | Error::NotPositiveDefinite(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = build_config(cli).and_then(|cfg| {
        log::info!("running {} with seed {}", cfg.experiment, cfg.seed);
        run_experiment(&cfg).map(|o| (cfg, o))
    });
    match result {
        Ok((cfg, outcome)) => {
            for run in &outcome.runs {
                let r = &run.report;
                println!(
                    "{}: {} iterations, acceptance {:.3}, {:.1}s",
                    r.sampler,
                    r.iterations(),
                    r.acceptance_rate(0..r.iterations()),
                    run.seconds
                );
            }
            for e in &outcome.efficiency {
                println!("{}: mean IACT {:.2}", e.sampler, e.mean_iact());
            }
            if let Some(m) = &outcome.monitors {
                println!("monitors: {} ({})", m.verdict, m.message);
            }
            println!("wrote {} files to {}", OUTPUT_FILES.len(), cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
