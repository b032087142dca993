mod args;

use args::Cli;
use charflow::config::{ConfigError, ConfigOverrides, EffectiveConfig};
use charflow::evolve::EvolveError;
use charflow::output::{emit_outputs, run_status, OutputError, RunStatus};
use charflow::scenario::ScenarioError;
use charflow::transform::TransformError;
use charflow::{run, Execution};
use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::Parser;
use std::process::ExitCode;
use thiserror::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_DIAGNOSTICS: u8 = 4;
const EXIT_IO: u8 = 5;

/// Energy outside `[−L, L]` relative to `E0` above which a warning is printed.
const BOUNDARY_ENERGY_WARN: f64 = 1e-10;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("CHARFLOW_THREADS must be a positive integer, got '{0}'")]
    Threads(String),
    #[error(transparent)]
    Run(EvolveError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. })
            | CliError::Config(ConfigError::Scenario(ScenarioError::Transform(TransformError::Io { .. })))
            | CliError::Output(_) => EXIT_IO,
            CliError::Config(_) | CliError::Threads(_) | CliError::Run(EvolveError::InvalidConfig(_)) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_RUNTIME,
        }
    }
}

fn parse_args() -> Result<Cli, ExitCode> {
    Cli::try_parse().map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = e.print();
            ExitCode::SUCCESS
        }
        ErrorKind::UnknownArgument => {
            let flag = match e.get(ContextKind::InvalidArg) {
                Some(ContextValue::String(s)) => s.trim_start_matches('-').to_string(),
                _ => String::from("?"),
            };
            eprintln!("error: {}", ConfigError::UnknownFlag(flag));
            ExitCode::from(EXIT_CONFIG)
        }
        _ => {
            let _ = e.print();
            ExitCode::from(EXIT_CONFIG)
        }
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CHARFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Threads(raw.clone()))?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn resolve(cli: &Cli) -> Result<EffectiveConfig, CliError> {
    let file = match &cli.config {
        Some(path) => ConfigOverrides::from_file(path)?,
        None => ConfigOverrides::default(),
    };
    Ok(file.overlay(cli.overrides()).resolve()?)
}

fn execute(cli: &Cli) -> Result<RunStatus, CliError> {
    let cfg = resolve(cli)?;
    configure_threads()?;
    let params = cfg.model_params();
    let data = cfg.initial_data()?;

    let l = cfg.half_width;
    let e0 = data.physical_energy(l, (40.0 * l).ceil() as usize);
    let edge = data.boundary_magnitude(l);
    if edge * edge > BOUNDARY_ENERGY_WARN * e0 {
        eprintln!(
            "warning: |u0(±L)| = {edge:e} is not negligible against E0 = {e0:e}; energy outside [−L, L] is lost, increase --L"
        );
    }

    let result = run(&data, &params, &cfg.run_config(Execution::default())).map_err(CliError::Run)?;
    let summary = emit_outputs(&cfg, &result)?;
    let status = run_status(&result);

    println!(
        "{} λ={} N={} T={}: E0={:.6e} max drift={:.3e} bounds {}",
        summary.scenario,
        summary.lambda,
        params.n_points(),
        result.final_state().time,
        summary.e0,
        summary.max_energy_drift,
        if summary.bounds_hold { "ok" } else { "VIOLATED" }
    );
    match (summary.first_breaking_time, summary.holder_fit) {
        (Some(t), Some(h)) => println!("first breaking at T={t:.10} (Hölder fit {h:.4}, nominal {:.4})", summary.holder_expected),
        (Some(t), None) => println!("first breaking at T={t:.10}"),
        _ => println!("no breaking"),
    }
    if let Some(f) = &summary.failure {
        eprintln!("error: {f}");
    }
    println!("outputs written to {}", cfg.output_dir.display());
    Ok(status)
}

fn main() -> ExitCode {
    let cli = match parse_args() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match execute(&cli) {
        Ok(RunStatus::Ok) => ExitCode::SUCCESS,
        Ok(RunStatus::DiagnosticsFailed) => ExitCode::from(EXIT_DIAGNOSTICS),
        Ok(RunStatus::RuntimeFailed) => ExitCode::from(EXIT_RUNTIME),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
