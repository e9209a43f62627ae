//! myolab command-line front end.
//!
//! Subcommands: `simulate` one configured run, `stability` eigenvalue sweeps
//! of the minimal coupled model, `converge` the time-step study, `preset`
//! the shipped experiment bundles, `params check` parameter-file validation.
//!
//! Exit codes: 0 success, 2 solver failure, 3 configuration error.

use clap::{Args, Parser, Subcommand};
use myolab::activation::MinimalModelParams;
use myolab::analysis::{run_convergence, CONVERGENCE_DTS, CONVERGENCE_REFERENCE_DT};
use myolab::config::{check_params, load_model, load_run_config, ParamSearch, PARAM_PATH_ENV};
use myolab::coupling::{simulate, SchemeKind};
use myolab::mechanics::{MechanicsParams, Potential};
use myolab::models::MODEL_IDS;
use myolab::presets::{run_preset, twitch_config, ExperimentPreset, PresetId};
use myolab::report::{emit_reports, sweep_csv, trajectory_csv};
use myolab::stability::{classify, log_grid, sweep};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "myolab",
    about = "0D laboratory for coupling active-force models with tissue mechanics",
    version
)]
struct Cli {
    /// Extra directory searched for model parameter files (also settable via
    /// the MYOLAB_PARAM_PATH environment variable).
    #[arg(long, global = true)]
    params_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation described by a TOML configuration file.
    Simulate(SimulateArgs),
    /// Sweep the iteration-matrix eigenvalues of the minimal coupled model.
    Stability(StabilityArgs),
    /// Time-step convergence study against a fine monolithic reference.
    Converge(ConvergeArgs),
    /// Run a shipped experiment preset and emit its report bundle.
    Preset(PresetArgs),
    /// Model parameter-file utilities.
    Params(ParamsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the model id.
    #[arg(long)]
    model: Option<String>,
    /// Override the coupling scheme.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeKind>,
    /// Override the time-step size (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the final time (s).
    #[arg(long)]
    t_end: Option<f64>,
    /// Override the mechanics substep ratio.
    #[arg(long)]
    substep: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    /// Coupling scheme to analyze (default: all three).
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeKind>,
    /// Passive stiffness (Pa).
    #[arg(long, default_value_t = 1.0e6)]
    kp: f64,
    /// Normalized viscosity (Pa s).
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Normalized mass (Pa s^2).
    #[arg(long, default_value_t = 0.0)]
    mass: f64,
    /// Attached fraction; defaults to the steady state mu0_f/r.
    #[arg(long)]
    mu0: Option<f64>,
    /// Smallest dt of the log grid (s).
    #[arg(long, default_value_t = 1.0e-6)]
    dt_min: f64,
    /// Largest dt of the log grid (s).
    #[arg(long, default_value_t = 10.0)]
    dt_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Model id.
    #[arg(long, default_value = "MDM")]
    model: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset id: twitch | ramp | quasistatic-fig3 | stability-sweep | convergence.
    id: String,
    /// Model id.
    #[arg(long, default_value = "MDM")]
    model: String,
    /// Override the time-step size (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the final time (s).
    #[arg(long)]
    t_end: Option<f64>,
    /// Mechanics substep ratio.
    #[arg(long, default_value_t = 1)]
    substep: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ParamsArgs {
    #[command(subcommand)]
    action: ParamsAction,
}

#[derive(Subcommand)]
enum ParamsAction {
    /// Validate parameter files (all models, or one given by --model).
    Check {
        #[arg(long)]
        model: Option<String>,
    },
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    match s {
        "monolithic" => Ok(SchemeKind::Monolithic),
        "segregated" => Ok(SchemeKind::Segregated),
        "stabilized-segregated" | "stabilized" => Ok(SchemeKind::StabilizedSegregated),
        "fractional-step" | "fractional" => Ok(SchemeKind::FractionalStep),
        other => Err(format!(
            "unknown scheme '{other}' (monolithic, segregated, stabilized-segregated, fractional-step)"
        )),
    }
}

const EXIT_SOLVER: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut search = ParamSearch::from_env();
    if let Some(dir) = &cli.params_dir {
        search.dirs.insert(0, dir.clone());
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&search, args),
        Command::Stability(args) => cmd_stability(args),
        Command::Converge(args) => cmd_converge(&search, args),
        Command::Preset(args) => cmd_preset(&search, args),
        Command::Params(args) => cmd_params(&search, args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let solver_failure = err
                .downcast_ref::<myolab::Error>()
                .map(|e| e.is_solver_failure())
                .unwrap_or(false);
            ExitCode::from(if solver_failure { EXIT_SOLVER } else { EXIT_CONFIG })
        }
    }
}

fn cmd_simulate(search: &ParamSearch, args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = load_run_config(&args.config)?;
    if let Some(model) = args.model {
        cfg.model = model;
    }
    if let Some(scheme) = args.scheme {
        cfg.scheme = scheme;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t_end) = args.t_end {
        cfg.t_end = t_end;
    }
    if let Some(substep) = args.substep {
        cfg.substep = substep;
    }
    let model = load_model(search, &cfg.model)?;
    let outcome = simulate(model.as_ref(), &cfg)?;

    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("trajectory.csv");
    std::fs::write(&csv_path, trajectory_csv(&outcome.trajectory))?;
    let meta = serde_json::json!({
        "model": cfg.model,
        "scheme": cfg.scheme,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "substep": cfg.substep,
        "steps_recorded": outcome.trajectory.len().saturating_sub(1),
        "failure": outcome.failure,
        "solver": outcome.stats,
    });
    std::fs::write(
        args.out.join("run.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    println!("wrote {}", csv_path.display());
    if let Some(f) = &outcome.failure {
        eprintln!(
            "solver failure at step {} (t = {} s): {}",
            f.step, f.time, f.message
        );
        return Ok(ExitCode::from(EXIT_SOLVER));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_stability(args: StabilityArgs) -> anyhow::Result<ExitCode> {
    let params = MinimalModelParams::default();
    let mech = MechanicsParams {
        mass: args.mass,
        visc: args.sigma,
        k_p: args.kp,
        potential: Potential::Quadratic,
    };
    let mu0 = args.mu0.unwrap_or(params.mu0_f / params.r);
    let grid = log_grid(args.dt_min, args.dt_max, args.points);
    let schemes = match args.scheme {
        Some(s) => vec![s],
        None => vec![
            SchemeKind::Monolithic,
            SchemeKind::Segregated,
            SchemeKind::StabilizedSegregated,
        ],
    };
    std::fs::create_dir_all(&args.out)?;
    for scheme in schemes {
        let rows = sweep(scheme, &grid, mu0, &params, &mech);
        let path = args.out.join(format!("sweep_{}.csv", scheme.label()));
        std::fs::write(&path, sweep_csv(&rows))?;
        let report = classify(scheme, &grid, &params, &mech)?;
        let unstable = report.per_dt.iter().filter(|v| !v.absolutely_stable).count();
        println!(
            "{}: max radius {:.6}, {} of {} grid points not absolutely stable, zero-stable: {}",
            scheme.label(),
            report
                .per_dt
                .iter()
                .map(|v| v.spectral_radius)
                .fold(0.0f64, f64::max),
            unstable,
            report.per_dt.len(),
            report.zero_stable
        );
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_converge(search: &ParamSearch, args: ConvergeArgs) -> anyhow::Result<ExitCode> {
    let model = load_model(search, &args.model)?;
    let base = twitch_config(&args.model, SchemeKind::Monolithic);
    let report = run_convergence(
        model.as_ref(),
        &base,
        &[SchemeKind::Monolithic, SchemeKind::StabilizedSegregated],
        &CONVERGENCE_DTS,
        CONVERGENCE_REFERENCE_DT,
    )?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("convergence.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    for line in &report.lines {
        println!(
            "{}: slope(e2) = {:.3}, slope(e_inf) = {:.3}",
            line.scheme, line.slope_e2, line.slope_e_inf
        );
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_preset(search: &ParamSearch, args: PresetArgs) -> anyhow::Result<ExitCode> {
    let id = PresetId::parse(&args.id)?;
    let mut preset = ExperimentPreset::new(id, &args.model);
    preset.dt = args.dt;
    preset.t_end = args.t_end;
    preset.substep = args.substep;
    let bundle = run_preset(&preset, search)?;
    let files = emit_reports(&bundle, &args.out)?;
    for run in &bundle.runs {
        let status = match &run.outcome.failure {
            None => "ok".to_string(),
            Some(f) => format!("failed at step {} ({})", f.step, f.message),
        };
        println!(
            "{}: {} [oscillation score {:.4}]",
            run.label, status, run.oscillation_score
        );
    }
    println!("wrote {} files to {}", files.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_params(search: &ParamSearch, args: ParamsArgs) -> anyhow::Result<ExitCode> {
    match args.action {
        ParamsAction::Check { model } => {
            let ids: Vec<&str> = match &model {
                Some(m) => vec![m.as_str()],
                None => MODEL_IDS.to_vec(),
            };
            let mut failed = false;
            for id in ids {
                match check_params(search, id) {
                    Ok(msg) => println!("{msg}"),
                    Err(e) => {
                        failed = true;
                        eprintln!("{id}: {e}");
                    }
                }
            }
            if failed {
                eprintln!("hint: set {PARAM_PATH_ENV} or --params-dir");
                Ok(ExitCode::from(EXIT_CONFIG))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
    }
}
