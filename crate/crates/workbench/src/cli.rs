//! `nematic` subcommands. Exit codes: 0 success, 1 usage or input error,
//! 2 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nematic_core::equilibrium::{
    estimate_theta, fit_decay, h1_distance, lyapunov_gap, solve_steady, FitTarget, RateFit, SteadyOptions,
    MIN_FIT_POINTS,
};
use nematic_core::flow::FlowState;
use nematic_core::grid::{ScalarField, VelocityField};
use nematic_core::simulator::{energy_audit, EnergyRecord, SimState};

use crate::config::{load_config, SimConfig};
use crate::io::{read_records, snapshot_write, write_records};
use crate::mms::{mms_run, MmsCase};
use crate::presets;
use crate::scenario::{self, ScenarioError};

const CONFIG_HELP: &str = "\
Config keys (JSON, unknown keys rejected):
  grid            {nx, ny, lx = 1, ly = 1}                      required
  potential       {kind: gl, eta} | {kind: quadratic, kappa}    required
  t_max           simulated time span                           required
  bc_mode         dirichlet | free_slip | periodic              default dirichlet
  params          {nu = 1, lambda = 1, gamma = 1}
  m               director components, 2 or 3                   default 2
  initial         {preset: NAME} | {snapshot: PATH}             default {preset: cavity}
  boundary        {preset: NAME} | {constant: [..]}             Dirichlet only; default: trace of the initial preset
  dt              {policy: fixed, value} | {policy: adaptive, cap}   default adaptive, cap 1e-2
  residual_target stop once |v|_H1 + |lap d - f(d)|_L2 drops below   default none
  max_steps       step limit                                    default none
  record_interval steps between records                         default 10
  output_dir      used when --out is absent
  seed_label      free-form label echoed into run.json
  linear          {rel_tol = 1e-10, max_iterations = 10000, method = spectral | cg}

Presets: cavity, taylor-green, kink, convex, freeslip-box";

#[derive(Debug, Parser)]
#[command(name = "nematic", version, about = "Nematic liquid-crystal flow workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation; writes records.csv, final.snap and run.json.
    #[command(after_long_help = CONFIG_HELP)]
    Simulate(SimulateArgs),
    /// Solve the steady director problem from a seed; writes steady.snap, steady.json and run.json.
    #[command(after_long_help = CONFIG_HELP)]
    Steady(SteadyArgs),
    /// Fit the decay of the energy gap (or of the state measure) in a records file.
    FitRate(FitRateArgs),
    /// Check the discrete energy law on a records file written at every step.
    Audit(AuditArgs),
    /// Manufactured-solution convergence study.
    Mms(MmsArgs),
}

#[derive(Debug, Args)]
struct Source {
    /// Config file.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Use a bundled preset's default config instead of a file.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory (falls back to the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SteadyArgs {
    #[command(flatten)]
    source: Source,
    /// Preset name or snapshot path providing the initial director.
    #[arg(long)]
    seed: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Gap,
    State,
}

#[derive(Debug, Args)]
struct FitRateArgs {
    #[arg(long)]
    records: PathBuf,
    /// Time window `a,b`.
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
    #[arg(long, value_enum, default_value = "gap")]
    target: TargetArg,
    /// Energy of the limit state; defaults to the last recorded total.
    #[arg(long)]
    e_inf: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MmsArgs {
    /// linear, spatial or temporal
    #[arg(long)]
    case: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("window start: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("window end: {e}"))?;
    if !(a < b) {
        return Err(format!("window start {a} must be below end {b}"));
    }
    Ok((a, b))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}
fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn scenario_err(e: ScenarioError) -> CliError {
    match e {
        ScenarioError::Sim(s) => numerical(s),
        other => usage(other),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Steady(a) => cmd_steady(a),
        Command::FitRate(a) => cmd_fit_rate(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Mms(a) => cmd_mms(a),
    }
}

fn load(source: &Source) -> Result<(SimConfig, Option<PathBuf>), CliError> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let cfg = load_config(path).map_err(usage)?;
            Ok((cfg, path.parent().map(Path::to_path_buf)))
        }
        (None, Some(name)) => Ok((presets::config(name).map_err(usage)?, None)),
        (None, None) => Err(usage("either --config or --preset is required")),
    }
}

fn out_dir(out: Option<PathBuf>, cfg: Option<&SimConfig>) -> Result<Option<PathBuf>, CliError> {
    let dir = out.or_else(|| cfg.and_then(|c| c.output_dir.clone()));
    if let Some(d) = &dir {
        std::fs::create_dir_all(d).map_err(|e| usage(format!("cannot create {}: {e}", d.display())))?;
    }
    Ok(dir)
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    std::fs::write(path, text + "\n").map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn manifest(command: &str, config: Option<&SimConfig>, termination: &str, started: Instant, extra: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config.map(|c| serde_json::to_value(c).expect("config serializes")),
        "termination": termination,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "details": extra,
    })
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (cfg, base) = load(&a.source)?;
    let dir = out_dir(a.out, Some(&cfg))?.ok_or_else(|| usage("simulate needs --out or output_dir"))?;
    let (_, result) = scenario::simulate(&cfg, base.as_deref()).map_err(scenario_err)?;
    match result {
        Ok(outcome) => {
            write_records(&outcome.records, &dir.join("records.csv")).map_err(usage)?;
            snapshot_write(&outcome.final_state, &dir.join("final.snap")).map_err(usage)?;
            let details = json!({
                "steps": outcome.steps,
                "halvings": outcome.halvings,
                "t_final": outcome.final_state.t,
                "records": outcome.records.len(),
            });
            write_json(&dir.join("run.json"), &manifest("simulate", Some(&cfg), outcome.termination.name(), started, details))?;
            println!(
                "{}: {} steps, t = {:.6}, terminated by {}",
                dir.display(),
                outcome.steps,
                outcome.final_state.t,
                outcome.termination.name()
            );
            Ok(())
        }
        Err(fail) => {
            write_records(&fail.records, &dir.join("records.csv")).map_err(usage)?;
            snapshot_write(&fail.last_state, &dir.join("last.snap")).map_err(usage)?;
            let details = json!({"steps": fail.steps, "t_final": fail.last_state.t, "error": fail.error.to_string()});
            write_json(&dir.join("run.json"), &manifest("simulate", Some(&cfg), "error", started, details))?;
            Err(numerical(fail))
        }
    }
}

fn cmd_steady(a: SteadyArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (cfg, base) = load(&a.source)?;
    let dir = out_dir(a.out, Some(&cfg))?;
    let seed = scenario::seed_director(&cfg, &a.seed, base.as_deref()).map_err(scenario_err)?;
    let trace = scenario::trace(&cfg).map_err(scenario_err)?;
    let potential = cfg.params().potential;
    let result = solve_steady(&seed, trace.as_ref(), &potential, &SteadyOptions::default());
    let sol = match result {
        Ok(s) => s,
        Err(e) => {
            if let Some(d) = &dir {
                let details = json!({"seed": a.seed, "error": e.to_string()});
                write_json(&d.join("run.json"), &manifest("steady", Some(&cfg), "error", started, details))?;
            }
            return Err(numerical(e));
        }
    };
    let report = json!({
        "seed": a.seed,
        "method": sol.method.name(),
        "newton_iterations": sol.iterations,
        "fallback_steps": sol.fallback_steps,
        "residual_norm": sol.residual_norm,
        "energy": sol.energy,
        "total_energy": sol.total_energy(cfg.params.lambda),
        "seed_h1_distance": h1_distance(&seed, &sol.d_inf),
    });
    if let Some(d) = &dir {
        let grid = cfg.grid();
        let state = SimState {
            t: 0.0,
            flow: FlowState { v: VelocityField::zeros(&grid), p: ScalarField::zeros(&grid) },
            director: sol.d_inf.clone(),
        };
        snapshot_write(&state, &d.join("steady.snap")).map_err(usage)?;
        write_json(&d.join("steady.json"), &report)?;
        write_json(&d.join("run.json"), &manifest("steady", Some(&cfg), "converged", started, report.clone()))?;
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn rate_json(fit: &RateFit) -> Value {
    json!({
        "model": fit.model.name(),
        "exponent": fit.exponent,
        "implied_theta": fit.implied_theta,
        "fit_rms": fit.fit_rms,
        "window": [fit.window.0, fit.window.1],
        "points": fit.points,
        "rms_exponential": fit.exponential.rms,
        "rms_algebraic": fit.algebraic.rms,
    })
}

fn cmd_fit_rate(a: FitRateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let records: Vec<EnergyRecord> = read_records(&a.records).map_err(usage)?;
    if records.len() < MIN_FIT_POINTS {
        return Err(numerical(format!(
            "insufficient points: {} records, need at least {MIN_FIT_POINTS}",
            records.len()
        )));
    }
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let report = match a.target {
        TargetArg::Gap => {
            let e_inf = a.e_inf.unwrap_or(records[records.len() - 1].total);
            let series = lyapunov_gap(&records, e_inf).map_err(numerical)?;
            let fit = fit_decay(&series.t, &series.gap, a.window, FitTarget::Gap).map_err(numerical)?;
            let theta = estimate_theta(&series, a.window, None);
            json!({
                "target": "gap",
                "e_inf": e_inf,
                "clamped": series.clamped,
                "fit": rate_json(&fit),
                "theta": match theta {
                    Ok(th) => json!({
                        "theta": th.theta, "ci95": th.ci95, "slope": th.slope, "rms": th.rms,
                        "window": [th.window.0, th.window.1], "points": th.points,
                    }),
                    Err(e) => json!({"error": e.to_string()}),
                },
            })
        }
        TargetArg::State => {
            let y: Vec<f64> = records.iter().map(|r| r.v_h1 + r.residual_l2).collect();
            let fit = fit_decay(&t, &y, a.window, FitTarget::State).map_err(numerical)?;
            json!({"target": "state", "fit": rate_json(&fit)})
        }
    };
    if let Some(d) = out_dir(a.out, None)? {
        write_json(&d.join("fit.json"), &report)?;
        write_json(&d.join("run.json"), &manifest("fit-rate", None, "done", started, report.clone()))?;
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let records = read_records(&a.records).map_err(usage)?;
    let rep = energy_audit(&records).map_err(numerical)?;
    let report = json!({
        "dt": rep.dt,
        "intervals": rep.residuals.len(),
        "integrated_residual": rep.integrated,
        "max_abs_residual": rep.max_abs,
        "energy_drop": rep.energy_drop,
        "relative": rep.relative,
    });
    if let Some(d) = out_dir(a.out, None)? {
        write_json(&d.join("audit.json"), &report)?;
        write_json(&d.join("run.json"), &manifest("audit", None, "done", started, report.clone()))?;
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn cmd_mms(a: MmsArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let case = MmsCase::named(&a.case).map_err(usage)?;
    let table = mms_run(&case).map_err(numerical)?;
    let report = serde_json::to_value(&table).expect("table serializes");
    if let Some(d) = out_dir(a.out, None)? {
        write_json(&d.join("mms.json"), &report)?;
        write_json(&d.join("run.json"), &manifest("mms", None, "done", started, report.clone()))?;
    }
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if !table.monotone {
        eprintln!("warning: errors are not monotone under refinement");
    }
    Ok(())
}
