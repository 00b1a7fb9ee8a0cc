//! `teleclone`: build multiuser channels, run telecloning, sweep parameters,
//! search for minimal-squeezing circuits and run the self-check suite.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::{CliError, EXIT_OK};

#[derive(Parser, Debug)]
#[command(name = "teleclone", version, about = "Continuous-variable telecloning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the (M+1)-mode channel state and print its squeezing budget.
    Mqc(MqcArgs),
    /// Run the telecloning protocol on a channel state.
    Teleclone(TelecloneArgs),
    /// Sweep one parameter and write a CSV table.
    Sweep(SweepArgs),
    /// Genetic search for the channel with the least total squeezing.
    Optimize(OptimizeArgs),
    /// Run the invariant suite; exit 1 if any check fails.
    Verify(VerifyArgs),
}

/// `u64` seed, or `random` to draw one from system entropy.
#[derive(Debug, Clone, Copy)]
pub enum SeedArg {
    Fixed(u64),
    Random,
}

impl SeedArg {
    pub fn resolve(self) -> u64 {
        match self {
            SeedArg::Fixed(s) => s,
            SeedArg::Random => rand::random(),
        }
    }
}

fn parse_seed(s: &str) -> Result<SeedArg, String> {
    if s.eq_ignore_ascii_case("random") {
        return Ok(SeedArg::Random);
    }
    s.parse().map(SeedArg::Fixed).map_err(|_| format!("`{s}` is neither an unsigned integer nor `random`"))
}

#[derive(Args, Debug)]
pub struct MqcArgs {
    /// Number of receivers.
    #[arg(long = "M", short = 'M')]
    pub m: Option<usize>,
    /// First beam-splitter angle (radians).
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    /// Squeezing of the receiver-side modes, matched to the input.
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    /// JSON spec document {"M": .., "theta0": .., "s": ..}; flags override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Write the state JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Analytic,
    Mc,
}

#[derive(Args, Debug)]
pub struct TelecloneArgs {
    #[arg(long = "M", short = 'M', conflicts_with = "state_file")]
    pub m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub s: f64,
    /// Use the 2M-mode EPR channel with this squeezing; receivers are the
    /// right-hand modes.
    #[arg(long, conflicts_with_all = ["state_file", "theta0"])]
    pub epr_r: Option<f64>,
    /// Channel state JSON {"modes", "mean", "cov"}.
    #[arg(long)]
    pub state_file: Option<PathBuf>,
    /// Port mode; every other mode is a receiver unless `--epr-r` is used.
    #[arg(long, default_value_t = 0)]
    pub port: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub p0: f64,
    /// Input squeezing; 0 means a coherent state.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub s_in: f64,
    /// Angles `θa,φa,θb,φb` of the two-mode unitary applied to (input,
    /// port) before the Bell mixer.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u2: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
    pub method: MethodArg,
    #[arg(long, default_value_t = teleclone_core::montecarlo::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: SeedArg,
    /// Tracked clone (index into the receivers).
    #[arg(long, default_value_t = 0)]
    pub clone: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Inclusive receiver range `lo:hi`.
    #[arg(long, group = "range")]
    pub m_range: Option<String>,
    /// `start:stop:count` over the first beam-splitter angle.
    #[arg(long, group = "range", allow_hyphen_values = true)]
    pub theta0_range: Option<String>,
    /// `start:stop:count` over matched squeezing.
    #[arg(long, group = "range", allow_hyphen_values = true)]
    pub s_range: Option<String>,
    /// `start:stop:count` over the EPR squeezing of the 2M-mode channel.
    #[arg(long, group = "range", allow_hyphen_values = true)]
    pub r_range: Option<String>,
    #[arg(long = "M", short = 'M', default_value_t = 2)]
    pub m: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
    pub method: MethodArg,
    #[arg(long, default_value_t = teleclone_core::montecarlo::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: SeedArg,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    SymmetricNoise,
    Fidelity,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long = "M", short = 'M')]
    pub m: usize,
    /// SearchConfig JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub mutation_sigma: Option<f64>,
    #[arg(long)]
    pub crossover_rate: Option<f64>,
    #[arg(long)]
    pub penalty_weight: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    /// Squeezing `s` of the target input.
    #[arg(long, allow_hyphen_values = true)]
    pub target_s: Option<f64>,
    /// Put the two-squeezer reference circuit in the initial population.
    #[arg(long)]
    pub seed_recipe: bool,
    #[arg(long, value_parser = parse_seed)]
    pub seed: Option<SeedArg>,
    /// Result JSON; the history CSV goes next to it unless `--history` is set.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated receiver counts.
    #[arg(long = "M", short = 'M', value_delimiter = ',', default_values_t = [2usize, 3, 4, 5])]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub trials: usize,
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: SeedArg,
    /// Write the full report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mqc(a) => commands::mqc(&a),
        Command::Teleclone(a) => commands::teleclone(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Verify(a) => commands::verify(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("teleclone: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
