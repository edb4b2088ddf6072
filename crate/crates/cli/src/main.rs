//! `borderforge`: headless scenario runs, batch evaluation, frame dumps and
//! the live session service. Exit status 0 on success, 1 on error, 2 when a
//! scenario ran but missed one of its criteria.

mod commands;
mod render;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "borderforge", version, about = "Teach virtual borders to a simulated robot with a laser pointer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
struct RunFlags {
    /// Run seed; defaults to the scenario's own seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation step (s); defaults to the scenario's.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its posterior map, report and session log.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run every scenario in a directory and fit teaching time against length.
    Eval {
        dir: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Dump camera frames of a scenario run as PNG color and 16-bit PGM depth pairs.
    Render {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Simulated seconds between dumped frames.
        #[arg(long, default_value_t = 5.0)]
        every: f64,
        /// Overlay the detection pipeline's blobs and the selected point.
        #[arg(long)]
        annotate: bool,
    },
    /// Serve live sessions over HTTP and WebSocket.
    Serve {
        /// Directory of scenario files providing the maps.
        dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Make sessions lockstep by default, advancing this many ticks per
        /// `step` message that does not give a count.
        #[arg(long)]
        headless_ticks_per_call: Option<u32>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] borderforge::scenario::ScenarioError),
    #[error(transparent)]
    Map(#[from] borderforge::grid::GridError),
    #[error(transparent)]
    Run(#[from] borderforge::eval::RunError),
    #[error(transparent)]
    Service(#[from] borderforge_server::ServiceError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

/// Whether every scenario met its criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Passed,
    Failed,
}

fn dispatch(cli: Cli) -> Result<Verdict, CliError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            flags,
        } => commands::run(&scenario, &out, flags.seed, flags.dt),
        Command::Eval {
            dir,
            out,
            flags,
            jobs,
        } => commands::eval(&dir, &out, flags.seed, flags.dt, jobs),
        Command::Render {
            scenario,
            out,
            flags,
            every,
            annotate,
        } => render::render(&scenario, &out, flags.seed, flags.dt, every, annotate),
        Command::Serve {
            dir,
            addr,
            headless_ticks_per_call,
        } => commands::serve(&dir, addr, headless_ticks_per_call),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BORDERFORGE_LOG", "warn")).init();
    // Usage errors exit 1; 2 is reserved for missed criteria.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(Verdict::Passed) => ExitCode::SUCCESS,
        Ok(Verdict::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
