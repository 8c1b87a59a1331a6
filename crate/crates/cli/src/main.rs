use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod oracle;

#[derive(Debug, Parser)]
#[command(name = "gauge-rig", version, about = "Rod-and-mass frameworks: constraint analysis, gauge dynamics and reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Constraint structure at the input configuration.
    Analyze(AnalyzeArgs),
    /// Integrate the equations of motion and write a trajectory.
    Simulate(SimulateArgs),
    /// Run several gauge policies from the same initial data and compare.
    GaugeCompare(CompareArgs),
    /// Fix one rod tension and report the induced gauge coefficient.
    GaugeFix(GaugeFixArgs),
    /// Reduce a trajectory of the four-mass system.
    Reduce(ReduceArgs),
    /// Compare the library against the closed-form solutions.
    OracleCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct InitialArgs {
    /// Framework JSON with a `positions` block.
    #[arg(long)]
    input: PathBuf,
    /// Angular velocity of the initial rigid rotation.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    omega: f64,
    /// Tension on the designated rod (first rod carrying a self-stress).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long = "t-end", default_value_t = std::f64::consts::TAU, value_parser = positive)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    step: f64,
    /// Keep every n-th step in the output.
    #[arg(long = "record-every", default_value_t = 1)]
    record_every: usize,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    initial: InitialArgs,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report on stdout instead of the summary.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    initial: InitialArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Gauge policy: `0`, a number, `const:c`, `cos:a,w`, `sin:a,w`, `cos`, `sin`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    xi: String,
    /// Trajectory file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to the extension of `--out`, else csv.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    initial: InitialArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Policies to compare (repeat the flag).
    #[arg(long, allow_hyphen_values = true, default_values_t = ["0".to_string(), "cos".to_string(), "0.5".to_string()])]
    xi: Vec<String>,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GaugeFixArgs {
    #[command(flatten)]
    initial: InitialArgs,
    /// Rod to fix, as `1-2`, `1,2` or `{1,2}`.
    #[arg(long = "fixed-edge")]
    fixed_edge: String,
    #[arg(long = "fixed-value", default_value_t = 0.0, allow_negative_numbers = true)]
    fixed_value: f64,
    /// Also integrate the gauge-fixed system up to this time.
    #[arg(long = "t-end", value_parser = positive)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    step: f64,
    #[arg(long = "record-every", default_value_t = 1)]
    record_every: usize,
    /// Trajectory of the gauge-fixed run.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    /// Framework JSON the trajectory was produced from.
    #[arg(long)]
    input: PathBuf,
    /// Trajectory written by `simulate` (CSV or JSON).
    #[arg(long)]
    trajectory: PathBuf,
    /// Reduced CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err("must be a positive finite number".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::GaugeCompare(a) => commands::gauge_compare(a),
        Command::GaugeFix(a) => commands::gauge_fix(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::OracleCheck => oracle::run(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
