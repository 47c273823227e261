//! `taskpilot`: run guided sessions, replay their logs, simulate studies and
//! evaluate corpora.
//!
//! Exit codes:
//! - 0: success
//! - 1: failure (replay mismatch, invalid annotations, other errors)
//! - 2: bad input (unknown task, missing or empty corpus, no participants,
//!   bad flags)
//! - 3: listen address already in use
//! - 4: corrupt session log

mod commands;
mod live;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use taskpilot_core::Condition;

#[derive(Parser)]
#[command(name = "taskpilot", version, about = "Step-by-step task guidance engine")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one guided session.
    Run(Box<RunArgs>),
    /// Re-drive the conductor from a session log and compare its effects.
    Replay {
        log: PathBuf,
    },
    /// Validate a corpus and print its metrics report.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Validate a corpus and write report.txt, report.csv and micro.csv.
    Report {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Simulate an experiment and write its corpus.
    Simulate(SimulateArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Task id from the task library.
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value = "ai", value_parser = parse_condition)]
    pub condition: Condition,
    /// Task library directory.
    #[arg(long, env = "TASKPILOT_TASKDIR", default_value = "tasks")]
    pub taskdir: PathBuf,
    /// Seed for mock perception noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Serve the live console stream on this address instead of running
    /// the scripted inputs on a virtual clock.
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long, default_value = "mock:replay")]
    pub perception: String,
    #[arg(long, default_value = "mock:script")]
    pub asr: String,
    #[arg(long, default_value = "mock:rules")]
    pub llm: String,
    #[arg(long, default_value = "mock:echo")]
    pub tts: String,
    /// Ground-truth annotation replayed by `mock:replay` perception.
    #[arg(long)]
    pub annotation: Option<PathBuf>,
    /// Confusion rate of `mock:replay` perception.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Transcript (JSON lines of `{"ts_ms", "text"}`) spoken by `mock:script`
    /// ASR.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Directory for the session log.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub session_id: Option<String>,
    #[arg(long)]
    pub participant: Option<String>,
    #[arg(long)]
    pub attempt: Option<u32>,
    /// Console assets served at `/`; a built-in page is used otherwise.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    #[arg(long, default_value = "corpus")]
    pub out: PathBuf,
    #[arg(long, env = "TASKPILOT_TASKDIR", default_value = "tasks")]
    pub taskdir: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config participant count.
    #[arg(long)]
    pub participants: Option<usize>,
    /// Replace corpus files already present in the output directory.
    #[arg(long)]
    pub force: bool,
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse()
}

/// An error that maps to a specific exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn fail(code: u8, message: impl Into<String>) -> anyhow::Error {
    Failure {
        code,
        message: message.into(),
    }
    .into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Run(args) => run::cmd_run(*args),
        Command::Replay { log } => commands::cmd_replay(&log),
        Command::Eval { corpus } => commands::cmd_eval(&corpus),
        Command::Report { corpus, out } => commands::cmd_report(&corpus, &out),
        Command::Simulate(args) => commands::cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<Failure>() {
            Some(f) => {
                eprintln!("error: {f}");
                ExitCode::from(f.code)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
