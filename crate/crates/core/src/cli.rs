//! Command implementations behind the `bai-lab` binary.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 config or instance
//! error, 3 solver failure, 4 insufficient data for a rate estimate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::arms::ArmError;
use crate::complexity::{self, Direction, SolverError};
use crate::config::ExperimentConfig;
use crate::policy::PolicyError;
use crate::sim::{self, SimConfig, SimError};

pub const CSV_HEADER: &str = "n,replications,errors,p_hat,ci_low,ci_high";
pub const CONFIDENCE_CSV_HEADER: &str = "replication,tau,correct,timed_out";
pub const DISCLAIMER: &str = "empirical evidence only";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("invalid instance: {0}")]
    Instance(ArmError),
    #[error("solver failure: {0}")]
    Solver(SolverError),
    #[error("{0}")]
    InsufficientData(SimError),
    #[error("simulation failure: {0}")]
    Sim(SimError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Instance(_) => 2,
            CliError::Solver(_) => 3,
            CliError::InsufficientData(_) => 4,
            CliError::Sim(_) | CliError::Io { .. } => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InsufficientData { .. } => CliError::InsufficientData(e),
            SimError::Solver(s) => CliError::Solver(s),
            SimError::Policy {
                source: PolicyError::Solver(s),
                ..
            } => CliError::Solver(s),
            SimError::InvalidBudgets
            | SimError::NoReplications
            | SimError::NotFixedConfidence(_) => CliError::Config(e.to_string()),
            other => CliError::Sim(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Complexity,
    Simulate,
    Probe,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Shortest decimal representation of `x` rounded to 12 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|f| serde_json::Number::from_f64(round_sig(f)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect())
        }
        other => other,
    }
}

fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

fn write_json(path: &Path, value: Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&round_json(value)).expect("json values serialize");
    text.push('\n');
    write_file(path, &text)
}

/// Fixed-budget CSV with the exact header [`CSV_HEADER`].
pub fn fixed_budget_csv(report: &sim::FixedBudgetReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.n,
            row.replications,
            row.errors,
            format_float(row.p_hat),
            format_float(row.ci_low),
            format_float(row.ci_high)
        );
    }
    out
}

fn fixed_confidence_csv(report: &sim::FixedConfidenceReport) -> String {
    let mut out = String::from(CONFIDENCE_CSV_HEADER);
    out.push('\n');
    for (r, o) in report.outcomes.iter().enumerate() {
        let _ = writeln!(out, "{r},{},{},{}", o.tau, o.correct, o.timed_out);
    }
    out
}

/// Sidecar path next to the main output: `out.csv` -> `out.<suffix>`.
pub fn sidecar_path(output: &Path, suffix: &str) -> PathBuf {
    output.with_extension(suffix)
}

struct Context {
    config: ExperimentConfig,
    output: PathBuf,
    sim: SimConfig,
}

fn load(config_path: &Path, opts: &RunOptions) -> Result<Context, CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    let output = Path::new(&config.output_path);
    let output = if output.is_relative() {
        config_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(output)
    } else {
        output.to_path_buf()
    };
    let mut sim = SimConfig::new(config.replications.unwrap_or(0), config.seed);
    sim.threads = opts.threads;
    Ok(Context {
        config,
        output,
        sim,
    })
}

pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> Result<(), CliError> {
    let ctx = load(config_path, opts)?;
    match command {
        Command::Complexity => cmd_complexity(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Probe => cmd_probe(&ctx),
    }
}

fn instance_json(config: &ExperimentConfig) -> Value {
    json!({
        "family": config.family.to_ascii_lowercase(),
        "means": config.means,
        "variances": config.variances,
    })
}

fn cmd_complexity(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let instance = config.instance()?;
    let opts = config.solver_options();
    let fc = complexity::gamma(&instance, Direction::FixedConfidence, &opts)
        .map_err(CliError::Solver)?;
    let na =
        complexity::gamma(&instance, Direction::NonAdaptive, &opts).map_err(CliError::Solver)?;
    let closed_form = complexity::two_armed_gaussian_closed_form(&instance).ok();
    let report = json!({
        "instance": instance_json(config),
        "best_arm": instance.best_arm(),
        "gamma_fc": fc.gamma,
        "gamma_na": na.gamma,
        "weights_fc": fc.optimal_weights,
        "weights_na": na.optimal_weights,
        "fixed_confidence": to_json(&fc),
        "non_adaptive": to_json(&na),
        "closed_form": closed_form.as_ref().map(to_json),
    });
    write_json(&ctx.output, report)
}

fn cmd_simulate(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let instance = config.instance()?;
    let policy = config.build_policy(&instance)?;
    config.replications()?;

    if !config.budgets.is_empty() {
        let window = config.rate_window()?;
        let report = sim::run_fixed_budget(&instance, policy.as_ref(), &config.budgets, &ctx.sim)?;
        write_file(&ctx.output, &fixed_budget_csv(&report))?;
        let rate = sim::estimate_rate(&report, window);
        let sidecar = match &rate {
            Ok(est) => json!({ "policy": report.policy, "rate": to_json(est) }),
            Err(e) => json!({ "policy": report.policy, "rate": null, "error": e.to_string() }),
        };
        write_json(&sidecar_path(&ctx.output, "rate.json"), sidecar)?;
        rate.map(|_| ()).map_err(CliError::from)
    } else if config.delta.is_some() {
        let report = sim::run_fixed_confidence(&instance, policy.as_ref(), &ctx.sim)?;
        let fc = complexity::gamma(
            &instance,
            Direction::FixedConfidence,
            &config.solver_options(),
        )
        .map_err(CliError::Solver)?;
        write_file(&ctx.output, &fixed_confidence_csv(&report))?;
        let summary = json!({
            "policy": report.policy,
            "delta": report.delta,
            "replications": report.outcomes.len(),
            "mean_tau": report.mean_tau,
            "error_rate": report.error_rate,
            "ratio": report.ratio,
            "timeouts": report.timeouts,
            "gamma_fc": fc.gamma,
            "ratio_to_gamma_fc": report.ratio / fc.gamma,
        });
        write_json(&sidecar_path(&ctx.output, "summary.json"), summary)
    } else {
        Err(CliError::Config(
            "simulate needs `budgets` (fixed budget) or `delta` (fixed confidence)".into(),
        ))
    }
}

fn cmd_probe(ctx: &Context) -> Result<(), CliError> {
    let config = &ctx.config;
    let instance = config.instance()?;
    let candidate = config.build_policy(&instance)?;
    config.replications()?;
    let window = config.rate_window()?;
    let solver = config.solver_options();
    let dominance = sim::probe_uniform_dominance(
        &instance,
        candidate.as_ref(),
        &config.budgets,
        &ctx.sim,
        window,
        &solver,
    )?;
    let conjectures =
        sim::probe_conjectures(&instance, &config.budgets, &ctx.sim, window, &solver)?;
    let report = json!({
        "disclaimer": DISCLAIMER,
        "instance": instance_json(config),
        "gamma_fc": dominance.gamma_fc,
        "gamma_na": dominance.gamma_na,
        "inverse_gamma_fc": dominance.inverse_gamma_fc,
        "inverse_gamma_na": dominance.inverse_gamma_na,
        "candidate": dominance.candidate,
        "rate_uniform": to_json(&dominance.rate_uniform),
        "rate_candidate": to_json(&dominance.rate_candidate),
        "rate_difference": dominance.rate_difference,
        "combined_standard_error": dominance.combined_standard_error,
        "uniform_rows": to_json(&dominance.uniform.rows),
        "candidate_rows": to_json(&dominance.candidate_report.rows),
        "conjectures": to_json(&conjectures),
    });
    write_json(&ctx.output, report)
}
