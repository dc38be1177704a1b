//! `fsforge`: command-line front end for the directed category pipeline.

mod commands;
mod output;
mod problem;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fsforge_core::floer::Grid;
use fsforge_core::Tolerances;

use crate::output::{ErrorReport, VERSION};

#[derive(Debug, Parser)]
#[command(name = "fsforge", version = VERSION, about = "Directed Fukaya-Seidel data of a Morse polynomial")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Angle of the reference ray in radians; overrides the problem file.
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Residual accepted for a critical point.
    #[arg(long, global = true)]
    tol_root: Option<f64>,
    /// Drift of the conserved quantity accepted along a flowline.
    #[arg(long, global = true)]
    tol_conserve: Option<f64>,
    /// Floer grid as NSxNT, both even and at least 16.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(short = 'o', long = "out", global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical points, values and Hessians.
    Crit { problem: PathBuf },
    /// Clockwise order of the critical values from the ray at angle alpha.
    Order { problem: PathBuf },
    /// Connecting flowlines for every ordered pair, with a diagram.
    Flows { problem: PathBuf },
    /// Absolute gradings of every generator.
    Grade { problem: PathBuf },
    /// Floer strips of the trivial family with their diagnostics.
    Floer { problem: PathBuf },
    /// The directed category with its m1 estimates and A-infinity check.
    Category { problem: PathBuf },
    /// Recount connections across a wall along a coefficient family.
    Wallcross { family: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Crit { .. } => "crit",
            Command::Order { .. } => "order",
            Command::Flows { .. } => "flows",
            Command::Grade { .. } => "grade",
            Command::Floer { .. } => "floer",
            Command::Category { .. } => "category",
            Command::Wallcross { .. } => "wallcross",
        }
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NSxNT, got {s:?}"))?;
    let ns = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let nt = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    Ok((ns, nt))
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(String),
    Domain(fsforge_core::Error),
}

impl From<fsforge_core::Error> for CliError {
    fn from(e: fsforge_core::Error) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "Io",
            CliError::Parse(_) => "Parse",
            CliError::Domain(e) => e.kind(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Io(m) | CliError::Parse(m) => m.clone(),
            CliError::Domain(e) => e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 2,
            _ => 1,
        }
    }
}

/// Everything a command needs besides its input file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    pub tolerances: Tolerances,
    pub grid: Option<(usize, usize)>,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    /// A square strip of half-width 5 with the requested node counts.
    pub fn floer_grid(&self, default: usize) -> Result<Grid, CliError> {
        let (ns, nt) = self.grid.unwrap_or((default, default));
        Grid::new(5.0, 5.0, ns, nt).map_err(|e| CliError::Parse(format!("--grid: {e}")))
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut tolerances = Tolerances::default();
    if let Some(t) = cli.tol_root {
        tolerances.root = t;
    }
    if let Some(t) = cli.tol_conserve {
        tolerances.conservation = t;
    }
    tolerances
        .validate()
        .map_err(|e| CliError::Parse(format!("tolerances: {e}")))?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let config = RunConfig {
        alpha: cli.alpha,
        tolerances,
        grid: cli.grid,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    match &cli.command {
        Command::Crit { problem } => commands::crit(&config, problem),
        Command::Order { problem } => commands::order(&config, problem),
        Command::Flows { problem } => commands::flows(&config, problem),
        Command::Grade { problem } => commands::grade(&config, problem),
        Command::Floer { problem } => commands::floer(&config, problem),
        Command::Category { problem } => commands::category(&config, problem),
        Command::Wallcross { family } => commands::wallcross(&config, family),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FSFORGE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = ErrorReport {
                command: cli.command.name(),
                version: VERSION,
                error: err.kind(),
                message: err.message(),
            };
            let json = serde_json::to_string_pretty(&report).unwrap_or_default();
            if let CliError::Domain(_) = err {
                if let Err(write_err) = output::write_json(&cli.out, "error.json", &report) {
                    log::warn!("could not write error report: {}", write_err.message());
                }
            }
            println!("{json}");
            eprintln!("fsforge {}: {}: {}", cli.command.name(), err.kind(), err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
