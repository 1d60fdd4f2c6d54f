mod cascade;
mod report;
mod run;
mod stats;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evobase::budget::BudgetUnit;

/// Budget-aware program search baselines, verifiers and comparison statistics.
#[derive(Parser)]
#[command(name = "evobase", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Budget cap, in --budget-unit.
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    #[arg(long, global = true, value_parser = parse_unit)]
    pub budget_unit: Option<BudgetUnit>,
    /// Run configuration TOML.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_unit(s: &str) -> Result<BudgetUnit, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Run a search engine and write its archive.
    Run(run::RunArgs),
    /// Score a solution file with a problem's verifier.
    Score(run::ScoreArgs),
    /// Estimators over score files and archives.
    #[command(subcommand)]
    Stats(stats::StatsCommand),
    /// Comparison table and budget curves from archives and score files.
    Report(report::ReportArgs),
    /// Staged re-evaluation of noisy candidates.
    #[command(subcommand)]
    Cascade(cascade::CascadeCommand),
}

/// A failed command: usage errors exit 2, everything else 1.
pub enum Failure {
    Usage(String),
    Domain(String),
}

pub type CmdResult = Result<(), Failure>;

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

pub fn domain(msg: impl std::fmt::Display) -> Failure {
    Failure::Domain(msg.to_string())
}

pub fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes to `out` when given, stdout otherwise.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| domain(format!("{}: {e}", dir.display())))?;
            }
            fs::write(path, bytes).map_err(|e| domain(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| domain(format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run::cmd_run(&cli.global, a),
        Command::Score(a) => run::cmd_score(a),
        Command::Stats(c) => stats::cmd_stats(&cli.global, c),
        Command::Report(a) => report::cmd_report(&cli.global, a),
        Command::Cascade(c) => cascade::cmd_cascade(&cli.global, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
    }
}
