use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod render;

use commands::Failure;

/// Rank items from pairwise comparisons with Bradley-Terry, and evaluate
/// comparators against ground-truth scores.
#[derive(Debug, Parser)]
#[command(name = "btrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random synthetic cohort CSV.
    GenCohort(GenCohortArgs),
    /// Write labeled training pairs for a cohort as JSON lines.
    Pairs(PairsArgs),
    /// Run a comparator over every pair of a cohort and write the comparison log.
    Simulate(SimulateArgs),
    /// Fit Bradley-Terry strengths to a comparison log.
    Rank(RankArgs),
    /// Run the cross-validated experiment described by a config file.
    Eval(EvalArgs),
    /// Repeat an experiment over several data percentiles.
    Ablate(AblateArgs),
    /// Render an experiment report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenCohortArgs {
    #[arg(long, default_value_t = 140)]
    n: usize,
    #[arg(long, default_value_t = 39)]
    subjects: usize,
    #[arg(long, default_value_t = 19.0, allow_negative_numbers = true)]
    score_min: f64,
    #[arg(long, default_value_t = 62.0, allow_negative_numbers = true)]
    score_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    #[value(name = "unordered_once", alias = "unordered-once")]
    UnorderedOnce,
    #[value(name = "both_orders", alias = "both-orders")]
    BothOrders,
}

#[derive(Debug, Args)]
struct PairsArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::UnorderedOnce)]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    cohort: PathBuf,
    /// Comparator config JSON, e.g. {"kind":"bt_noisy","beta":0.1}.
    #[arg(long)]
    comparator_config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Comparison log, one {"winner","loser"} object per line.
    #[arg(long)]
    comparisons: PathBuf,
    /// Restrict and check ids against this cohort. Without it the items are
    /// the ids that appear in the log.
    #[arg(long)]
    cohort: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    cohort: PathBuf,
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "100,90,80,70")]
    percentiles: Vec<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn run(args: impl IntoIterator<Item = OsString>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            commands::emit(&e.render().to_string());
            return Ok(());
        }
        Err(e) => return Err(Failure::Usage(e.render().to_string())),
    };
    match cli.command {
        Command::GenCohort(a) => commands::gen_cohort(a.n, a.subjects, a.score_min, a.score_max, a.seed, &a.out),
        Command::Pairs(a) => commands::pairs(
            &a.cohort,
            match a.mode {
                Mode::UnorderedOnce => btrank::pairs::PairOrdering::UnorderedOnce,
                Mode::BothOrders => btrank::pairs::PairOrdering::BothOrders,
            },
            &a.out,
        ),
        Command::Simulate(a) => commands::simulate(&a.cohort, &a.comparator_config, a.seed, &a.out),
        Command::Rank(a) => commands::rank(
            &a.comparisons,
            a.cohort.as_deref(),
            btrank::bt::FitConfig {
                epsilon: a.epsilon,
                tolerance: a.tol,
                max_iterations: a.max_iter,
            },
            &a.out,
        ),
        Command::Eval(a) => commands::eval(&a.cohort, &a.config, &a.out),
        Command::Ablate(a) => commands::ablate(&a.cohort, &a.config, &a.percentiles, &a.out_dir),
        Command::Report(a) => commands::report(&a.input, matches!(a.format, Format::Csv)),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(message) if message.starts_with("error:") => eprint!("{message}"),
                other => eprintln!("btrank: {other}"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}
