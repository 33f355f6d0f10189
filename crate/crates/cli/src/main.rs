use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod run;
mod settings;

use settings::{Command, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or preconditions. Exit code 2.
    Validation(String),
    /// A numerical guard stopped the computation. Exit code 3.
    Numerical(fallingballs::Error),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(e) => e.code(),
            CliError::Io(_) => "io",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl From<fallingballs::Error> for CliError {
    fn from(e: fallingballs::Error) -> Self {
        if e.is_numerical_guard() {
            CliError::Numerical(e)
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "fallingballs", version, about = "Falling-ball billiard experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML file with defaults for any flag; flags take precedence.
    #[arg(long, env = "FALLINGBALLS_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Sub {
    /// Event-by-event trajectory as CSV.
    Simulate(Common),
    /// Lyapunov spectrum, one JSON object per seed.
    Lyapunov(Common),
    /// Quadratic-form increments at every collision as CSV.
    QformAudit(Common),
    /// Singular values of the candle Jacobian at each k.
    RankTest(Common),
    /// Equal-mass identity dq = t dv along a trajectory.
    Oracle(Common),
    /// Monte-Carlo rank scan over random decreasing masses.
    MassScan(Common),
    /// Periodic orbit and monodromy moduli for two balls.
    StableOrbit(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Lyapunov(c) => (Command::Lyapunov, c),
        Sub::QformAudit(c) => (Command::QformAudit, c),
        Sub::RankTest(c) => (Command::RankTest, c),
        Sub::Oracle(c) => (Command::Oracle, c),
        Sub::MassScan(c) => (Command::MassScan, c),
        Sub::StableOrbit(c) => (Command::StableOrbit, c),
    };
    let started = Instant::now();
    let result = common
        .config
        .as_deref()
        .map(Settings::from_file)
        .transpose()
        .map(|file| common.settings.over(file.unwrap_or_default()).resolve(command))
        .and_then(|settings| {
            settings.validate()?;
            run::execute(command, &settings, started)
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::from(e.exit_code())
        }
    }
}
