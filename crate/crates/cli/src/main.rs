//! `intercept`: command-line front end for the interception planner.

mod commands;
mod plots;
mod records;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use intercept_core::{SpeedMode, Tracking};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments (exit 2).
    Usage(String),
    /// Scenario file missing, malformed or invalid (exit 2).
    Scenario(String),
    /// The planner found no feasible plan (exit 1).
    Infeasible(String),
    /// I/O or rendering failure (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Scenario(_) => 2,
            CliError::Infeasible(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Scenario(m) => write!(f, "scenario error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "intercept", version, about = "Plan and simulate moving-target interception for a car-like robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Noise seed; overrides the scenario's `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files and plots/
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug)]
pub struct OnOff(pub bool);

impl ValueEnum for OnOff {
    fn value_variants<'a>() -> &'a [Self] {
        &[OnOff(true), OnOff(false)]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(if self.0 { "on" } else { "off" }))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TrackArg {
    Playback,
    Pursuit,
}

impl From<TrackArg> for Tracking {
    fn from(t: TrackArg) -> Self {
        match t {
            TrackArg::Playback => Tracking::Playback,
            TrackArg::Pursuit => Tracking::Pursuit,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SpeedModeArg {
    Optimized,
    Uniform,
}

impl From<SpeedModeArg> for SpeedMode {
    fn from(m: SpeedModeArg) -> Self {
        match m {
            SpeedModeArg::Optimized => SpeedMode::Optimized,
            SpeedModeArg::Uniform => SpeedMode::Uniform,
        }
    }
}

/// Overrides for the scenario's `[plan]` block.
#[derive(Args)]
pub struct RunFlags {
    /// Re-plan periodically; `on` uses the scenario period or 1 s
    #[arg(long)]
    replan: Option<OnOff>,
    /// How the robot follows the plan
    #[arg(long)]
    track: Option<TrackArg>,
    /// Speed planner, or the constant-speed baseline
    #[arg(long)]
    speed_mode: Option<SpeedModeArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PredictMode {
    Uniform,
    Curve,
}

#[derive(Subcommand)]
enum Command {
    /// Prediction error versus horizon over many noise seeds
    Predict {
        /// Scenario TOML file or built-in name; defaults to the built-in for --mode
        scenario: Option<String>,
        /// Target motion used when no scenario is given
        #[arg(long, value_enum, default_value = "uniform")]
        mode: PredictMode,
        /// Number of noise seeds (seed, seed + 1, ...)
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Initial path plan: Hybrid A* and the smoothed path
    Plan {
        /// Scenario TOML file or built-in name
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Initial speed plan: ST graph, corridor and optimized profile
    Speed {
        /// Scenario TOML file or built-in name
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Full closed-loop interception run
    Intercept {
        /// Scenario TOML file or built-in name
        scenario: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Per-stage planning times over repeated initial plans
    Bench {
        /// Scenario TOML file or built-in name
        scenario: String,
        /// Number of plans
        #[arg(long, default_value_t = 20)]
        repeat: usize,
        /// Run the plans concurrently (faster, noisier timings)
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Re-render every SVG in DIR/plots from the CSV files in DIR
    Plot {
        /// Directory written by an earlier command
        dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Predict { scenario, mode, trials, common } => {
            let name = scenario.unwrap_or_else(|| {
                match mode {
                    PredictMode::Uniform => "table1_uniform",
                    PredictMode::Curve => "table1_curve",
                }
                .to_string()
            });
            commands::predict(commands::load_file(&name)?, common.seed, trials, &common.out)
        }
        Command::Plan { scenario, common } => commands::plan(commands::load_file(&scenario)?, common.seed, &common.out),
        Command::Speed { scenario, common } => commands::speed(commands::load_file(&scenario)?, common.seed, &common.out),
        Command::Intercept { scenario, common, flags } => {
            commands::intercept(commands::load_file(&scenario)?, common.seed, &flags, &common.out)
        }
        Command::Bench { scenario, repeat, parallel, common, flags } => {
            commands::bench(commands::load_file(&scenario)?, common.seed, repeat, parallel, &flags, &common.out)
        }
        Command::Plot { dir } => commands::plot(&dir),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("intercept: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
