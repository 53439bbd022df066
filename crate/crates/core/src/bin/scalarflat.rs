//! Command-line front end: `scalarflat <command> --config run.json --out results/`.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use scalarflat::config::RunConfig;
use scalarflat::runner::{error_record, execute, write_artifacts, Command, RunManifest};
use scalarflat::Error;

#[derive(Parser, Debug)]
#[command(name = "scalarflat", version, about = "Scalar-flat normal graphs over cones on products of spheres")]
struct Cli {
    #[command(subcommand)]
    command: Option<Cmd>,
    /// JSON configuration; omitted sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Directory for cached spectra.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Radii and curvature invariants of the link.
    Link,
    /// Weighted link spectrum and threshold selection.
    Spectrum,
    /// Harmonic extension of the boundary data.
    SolveLinear,
    /// Picard iteration for the scalar-flat graph.
    SolveGraph,
    /// Curvature-oracle calibration and remainder checks.
    Verify,
    /// Stability index, witness and quadratic-form checks.
    Stability,
    /// Convergence scan over the configured lambdas.
    LambdaScan,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Link => Command::Link,
            Cmd::Spectrum => Command::Spectrum,
            Cmd::SolveLinear => Command::SolveLinear,
            Cmd::SolveGraph => Command::SolveGraph,
            Cmd::Verify => Command::Verify,
            Cmd::Stability => Command::Stability,
            Cmd::LambdaScan => Command::LambdaScan,
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Run(Error),
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(RunConfig::from_json(&text)?)
        }
    }
}

fn run(cli: &Cli, command: Command) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the worker pool")
            .map_err(Failure::Config)?;
    }
    let config = load_config(cli.config.as_ref()).map_err(Failure::Config)?;
    let manifest = RunManifest { command, config, cache: cli.cache.clone() };
    let artifacts = execute(&manifest).map_err(Failure::Run)?;
    write_artifacts(&cli.out, &artifacts).map_err(Failure::Run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        let text = serde_json::to_string_pretty(&RunConfig::default()).expect("defaults serialize");
        let _ = writeln!(std::io::stdout(), "{text}");
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("no command given; see --help");
        return ExitCode::from(1);
    };
    let command = Command::from(cmd);
    let (code, record) = match run(&cli, command) {
        Ok(()) => return ExitCode::SUCCESS,
        Err(Failure::Config(e)) => (1, error_record(Some(command), "config", &format!("{e:#}"), None)),
        Err(Failure::Run(e)) => {
            let code = if e.is_numerical() { 2 } else { 1 };
            let kind = match e {
                _ if e.is_numerical() => "numerical",
                Error::Artifact(_) => "io",
                _ => "config",
            };
            (code, error_record(Some(command), kind, &e.to_string(), Some(&e)))
        }
    };
    eprintln!("error: {}", record["message"].as_str().unwrap_or_default());
    let _ = std::fs::create_dir_all(&cli.out);
    let _ = std::fs::write(cli.out.join("error.json"), serde_json::to_vec_pretty(&record).unwrap_or_default());
    ExitCode::from(code)
}
