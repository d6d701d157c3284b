//! `racelab`: training, evaluation, track tooling and telemetry analysis.

mod analyze;
mod config;
mod eval;
mod track;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use racelab_core::env::ActuationMode;

#[derive(Debug, Parser)]
#[command(name = "racelab", version, about = "Racecar torque-vectoring reinforcement learning lab")]
struct Cli {
    /// Log filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy; writes checkpoints, a training log and eval telemetry.
    Train(TrainArgs),
    /// Run the deterministic policy and record per-episode telemetry.
    Eval(EvalArgs),
    /// Learning curves, GG envelopes, corner segments and lap comparisons.
    Analyze(AnalyzeArgs),
    /// Generate, validate or describe track files.
    #[command(subcommand)]
    Track(TrackCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    #[value(name = "active_4wd")]
    Active4wd,
    #[value(name = "passive_4wd")]
    Passive4wd,
}

impl From<Mode> for ActuationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Active4wd => ActuationMode::Active4wd,
            Mode::Passive4wd => ActuationMode::Passive4wd,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Run configuration (TOML with optional `track`, `[vehicle]`, `[env]`, `[train]`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Track file, or `oval` / `paper_scale`.
    #[arg(long)]
    track: Option<String>,
    /// Vehicle parameter file (TOML); replaces the `[vehicle]` section.
    #[arg(long)]
    vehicle: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Total environment steps.
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_envs: Option<usize>,
    /// Rollout worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Evaluation cadence in environment steps.
    #[arg(long)]
    eval_interval: Option<u64>,
    /// Single-worker mode: bit-reproducible for a fixed seed.
    #[arg(long)]
    deterministic: bool,
    /// Continue the run in `--out` from its latest checkpoint.
    #[arg(long)]
    resume: bool,
    /// Run directory; relative paths go under $RACELAB_OUTPUT_ROOT when set.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Track file or built-in name; defaults to the run's configured track.
    #[arg(long)]
    track: Option<String>,
    /// Run configuration; defaults to the `config.toml` of the checkpoint's run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Actuation mode; defaults to the checkpoint's.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// Step cap per episode; defaults to the configured eval cap.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for telemetry CSVs and the episode index.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Lap telemetry CSV files.
    telemetry: Vec<PathBuf>,
    /// Training log (JSON lines) for the learning curve.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Two laps to compare side by side, e.g. passive then active.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<PathBuf>>,
    /// Arc-length window `FROM:TO` in meters; repeatable. Corners are
    /// detected from the telemetry when none is given.
    #[arg(long = "segment", value_parser = parse_segment)]
    segments: Vec<(f64, f64)>,
    /// GG envelope direction bin width, degrees.
    #[arg(long, default_value_t = racelab_core::telemetry::DEFAULT_BIN_DEG)]
    bin_deg: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_segment(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected FROM:TO")?;
    let from: f64 = a.trim().parse().map_err(|e| format!("bad FROM: {e}"))?;
    let to: f64 = b.trim().parse().map_err(|e| format!("bad TO: {e}"))?;
    if from < to {
        Ok((from, to))
    } else {
        Err("FROM must be below TO".into())
    }
}

#[derive(Debug, Subcommand)]
enum TrackCommand {
    /// Write a generated layout as a track file.
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Check a track file and list every problem found.
    Validate { file: PathBuf },
    /// Print length, width and curvature statistics.
    Info {
        /// Track file or built-in name.
        track: String,
    },
}

#[derive(Debug, Subcommand)]
enum GenerateCommand {
    /// Stadium: two straights joined by half circles.
    Oval {
        #[arg(long, default_value_t = 100.0)]
        straight: f64,
        #[arg(long, default_value_t = 30.0)]
        radius: f64,
        #[arg(long, default_value_t = 10.0)]
        width: f64,
        #[arg(long, default_value = "oval.json")]
        out: PathBuf,
    },
    /// Full-scale mixed circuit of about 4 km.
    #[command(name = "paper_scale")]
    PaperScale {
        #[arg(long, default_value_t = 12.0)]
        width: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value = "paper_scale.json")]
        out: PathBuf,
    },
}

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, configuration or input files (exit 1).
    Config(anyhow::Error),
    /// Failure after the work started (exit 2).
    Runtime(anyhow::Error),
}

pub type Outcome = Result<(), Failure>;

/// Tags errors with the stage they happened in.
pub trait Stage<T> {
    fn config_err(self) -> Result<T, Failure>;
    fn runtime_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn config_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp(None).init();
    let outcome = match cli.command {
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Track(cmd) => track::run(cmd),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
