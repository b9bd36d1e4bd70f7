mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] cadlag_qv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Format(_) | CliError::Core(cadlag_qv::Error::Format(_)) => 3,
            CliError::Config(_) | CliError::Core(_) => 2,
        }
    }
}

/// Outcome of a command that completed.
pub enum Verdict {
    Settled,
    Unsettled,
}

#[derive(Parser)]
#[command(name = "cadlag-qv", version, about = "Quadratic variation of càdlàg paths along partitions")]
struct Cli {
    /// JSON file with default option values; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadratic variation along a partition scheme.
    #[command(subcommand)]
    Qv(QvCommand),
    /// Skorokhod J1 distance between two paths.
    Dist(RunConfig),
    /// Terms of the pathwise Itô formula per level.
    Ito(RunConfig),
    /// Seeded Monte Carlo ensembles.
    #[command(subcommand)]
    Mc(McCommand),
}

#[derive(Subcommand)]
enum QvCommand {
    /// q_n, s_n or p_n at a time, one line per level.
    Compute(RunConfig),
    /// The limit of q_n and its decomposition.
    Limit(RunConfig),
    /// Entrywise limit of the matrix q_n of a vector path.
    Matrix(RunConfig),
}

#[derive(Subcommand)]
enum McCommand {
    Run(RunConfig),
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CADLAG_QV_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("CADLAG_QV_THREADS = `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

type Handler = fn(&RunConfig) -> Result<Verdict, CliError>;

/// Returns whether the run should fail as unsettled.
fn run(cli: Cli) -> Result<bool, CliError> {
    threads()?;
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let (flags, handler): (RunConfig, Handler) = match cli.command {
        Command::Qv(QvCommand::Compute(c)) => (c, commands::qv_compute),
        Command::Qv(QvCommand::Limit(c)) => (c, commands::qv_limit),
        Command::Qv(QvCommand::Matrix(c)) => (c, commands::qv_matrix),
        Command::Dist(c) => (c, commands::dist),
        Command::Ito(c) => (c, commands::ito),
        Command::Mc(McCommand::Run(c)) => (c, commands::mc_run),
    };
    let config = flags.over(file);
    let verdict = handler(&config)?;
    Ok(config.strict && matches!(verdict, Verdict::Unsettled))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::from(1),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
