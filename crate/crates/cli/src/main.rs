use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod source;

use source::SourceSpec;

#[derive(Parser)]
#[command(name = "procmap", version, about = "Bounded-memory process map discovery from event streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine a process map from a log file or a live stream.
    Mine(MineArgs),
    /// Compare a mined snapshot against the exact graph of a log.
    Evaluate(EvaluateArgs),
    /// Sweep techniques and budgets over a log and write BenchRow CSV.
    Bench(BenchArgs),
    /// Convert a JSON snapshot to DOT, JSON or an edge-list CSV.
    Export(ExportArgs),
    /// Write a seeded synthetic log.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    AsIs,
    ByTimestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dot,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Zipf,
    Random,
}

/// Case-handling options shared by `mine` and `bench`.
#[derive(Args, Clone, Debug)]
pub struct CaseArgs {
    /// Activity that ends a case (repeatable).
    #[arg(long = "end-activity", value_name = "NAME")]
    pub end_activities: Vec<String>,
    /// Drop cases that have been running longer than this.
    #[arg(long, value_name = "MS")]
    pub case_ttl: Option<u64>,
}

#[derive(Args)]
pub struct MineArgs {
    /// `stdin`, `tcp:<host:port>`, `file:<path>` or a plain path.
    #[arg(long, default_value = "stdin")]
    pub source: SourceSpec,
    #[arg(long, default_value = "lfu")]
    pub policy: String,
    /// Process map budget: a count, `losslessN` or `directedN`.
    #[arg(long)]
    pub bpm: Option<String>,
    /// Item budget for `--policy lcb` (also accepted for the other policies).
    #[arg(long)]
    pub budget: Option<String>,
    /// Running-case budget.
    #[arg(long, default_value_t = 1000)]
    pub brc: usize,
    #[command(flatten)]
    pub cases: CaseArgs,
    /// Also write a snapshot every N events.
    #[arg(long, value_name = "N")]
    pub snapshot_every: Option<u64>,
    /// Event order for file sources; streams are read in arrival order.
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Final snapshot path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write one JSON line per observed event to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Leave ms_per_event out of snapshots so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// The complete log.
    pub log: PathBuf,
    /// A JSON snapshot written by `mine`.
    pub snapshot: PathBuf,
    #[arg(long, value_enum, default_value = "by-timestamp")]
    pub order: OrderArg,
    #[arg(long)]
    pub strict: bool,
    /// Print only the JSON report or only the CSV row.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args)]
pub struct BenchArgs {
    pub log: PathBuf,
    /// Comma-separated techniques.
    #[arg(long, default_value = "lcb,lru,lfu,lfu-da")]
    pub techniques: String,
    /// Comma-separated budgets (counts, `losslessN`, `directedN`) or `auto`.
    #[arg(long, default_value = "auto")]
    pub budgets: String,
    /// Number of budgets for `auto`.
    #[arg(long, default_value_t = 12)]
    pub points: usize,
    /// Running-case budget; defaults to the number of cases in the log.
    #[arg(long)]
    pub brc: Option<usize>,
    #[command(flatten)]
    pub cases: CaseArgs,
    #[arg(long, value_enum, default_value = "by-timestamp")]
    pub order: OrderArg,
    #[arg(long)]
    pub strict: bool,
    /// CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write 0 for ms_per_event so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    /// Run sweep points one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args)]
pub struct ExportArgs {
    pub snapshot: PathBuf,
    #[arg(long, value_enum, default_value = "dot")]
    pub format: Format,
    /// Add virtual start and end nodes (needs a snapshot mined with end activities).
    #[arg(long)]
    pub with_start_end: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "zipf")]
    pub model: ModelArg,
    /// Number of activities, including the closing one.
    #[arg(long, default_value_t = 20)]
    pub activities: usize,
    #[arg(long, default_value_t = 10_000)]
    pub events: usize,
    /// Maximum number of cases open at once.
    #[arg(long, default_value_t = 10)]
    pub interleaving: usize,
    #[arg(long, default_value_t = 1.0)]
    pub exponent: f64,
    /// Probability of moving to the closing activity after each step.
    #[arg(long, default_value_t = 0.1)]
    pub end_probability: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Log path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the exact graph of the generated log as a JSON snapshot.
    #[arg(long)]
    pub dfg: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mine(args) => commands::mine(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Bench(args) => commands::bench(args),
        Command::Export(args) => commands::export(args),
        Command::Generate(args) => commands::generate(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
