//! `skillground`: build skill databases, inspect them, and query them.
//!
//! Exit codes: 0 success, 1 partial result, 2 usage or I/O error.

mod commands;
mod context;

use std::fmt;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use skillground::genpipe::{PriceTable, DEFAULT_BATCH_SIZE};
use skillground::retrieval::DEFAULT_K;
use skillground::skilldb::Category;
use skillground::Method;

use context::BackendSpec;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn partial(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        Self::usage(e.to_string())
    }

    pub fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        Self::usage(format!("{}: {e}", path.display()))
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Parser, Debug)]
#[command(name = "skillground", version, about = "Skill database generation and retrieval for legged robots")]
struct Cli {
    /// Seed for every random choice (shuffles, mock backends).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate instructions or a full skill database with an LLM provider.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
    /// Gait, period and velocity distributions of a database.
    Stats(StatsArgs),
    /// Retrieve the best-matching skill for a query.
    Retrieve(RetrieveArgs),
    /// Retrieval accuracy of every method on an annotation set.
    Eval(EvalArgs),
    /// Navigation simulation with and without the velocity governor.
    Navsim(NavsimArgs),
    /// Serve retrieval over HTTP until interrupted.
    Serve(ServeArgs),
    /// Check a running encoder backend against the wire protocol.
    Conformance(ConformanceArgs),
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Generate instruction lists only.
    Instructions(GenInstructionsArgs),
    /// Generate descriptors (and instructions, unless given) into a database.
    Skills(GenSkillsArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProviderKind {
    /// Deterministic offline provider.
    Fixture,
    /// OpenAI-compatible endpoint configured through environment variables.
    Http,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CategoryArg {
    All,
    Mimic,
    Scene,
    Direct,
}

impl CategoryArg {
    fn category(self) -> Option<Category> {
        match self {
            Self::All => None,
            Self::Mimic => Some(Category::Mimic),
            Self::Scene => Some(Category::Scene),
            Self::Direct => Some(Category::Direct),
        }
    }
}

#[derive(Args, Debug)]
pub struct GenInstructionsArgs {
    /// Number of instructions (split evenly across categories with `all`).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = CategoryArg::All)]
    pub category: CategoryArg,
    #[arg(long, value_enum, default_value_t = ProviderKind::Fixture)]
    pub provider: ProviderKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenSkillsArgs {
    /// Records to generate, split evenly across categories.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), required_unless_present = "instructions")]
    pub n: Option<u64>,
    /// Instruction file written by `gen instructions`.
    #[arg(long, conflicts_with = "n")]
    pub instructions: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProviderKind::Fixture)]
    pub provider: ProviderKind,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE, value_parser = positive)]
    pub batch_size: usize,
    /// Ask for descriptors without a reasoning field.
    #[arg(long)]
    pub no_reasoning: bool,
    /// USD per 1k prompt and completion tokens, as `prompt,completion`.
    #[arg(long)]
    pub price: Option<PriceTable>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Skill database (defaults to the bundled fixture).
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Annotation set (defaults to the bundled one when `--db` is omitted).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RetrievalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "mock:oracle")]
    pub backend: BackendSpec,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = Method::Mixed)]
    pub method: Method,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Output directory for the CSV and SVG reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Period bin edges: `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub period_bins: Option<String>,
    /// Velocity bin edges: `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub vel_bins: Option<String>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("query").required(true))]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[arg(long, group = "query")]
    pub text: Option<String>,
    /// PNG file.
    #[arg(long, group = "query")]
    pub image: Option<PathBuf>,
    /// Text rendered onto an image before encoding.
    #[arg(long, group = "query")]
    pub text_as_image: Option<String>,
    /// Read queries from stdin, one per line; prefix with `img:` to render.
    #[arg(long, group = "query")]
    pub repl: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "mock:oracle")]
    pub backend: BackendSpec,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Repeat with seeds `seed..seed+seeds` and pool the hits.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    /// Also write the CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NavsimArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Scenario JSON (defaults to the bundled corridor).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Seconds between limit updates.
    #[arg(long, default_value_t = 5.0)]
    pub period: f64,
    /// Velocity limit before the first retrieval.
    #[arg(long, default_value_t = 0.5)]
    pub fallback_limit: f64,
    /// Directory for the governed and ungoverned run logs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "mock:oracle")]
    pub backend: BackendSpec,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Also serve the backend over the encoder protocol.
    #[arg(long)]
    pub expose_encoder: bool,
}

#[derive(Args, Debug)]
pub struct ConformanceArgs {
    /// Base URL of the encoder server.
    #[arg(long)]
    pub url: String,
    #[arg(long, default_value = "run beautifully like a horse")]
    pub probe: String,
    #[arg(long, default_value_t = 120)]
    pub timeout_s: u64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen { what: GenCommand::Instructions(a) } => commands::gen_instructions(&a),
        Command::Gen { what: GenCommand::Skills(a) } => commands::gen_skills(&a, seed),
        Command::Stats(a) => commands::stats(&a),
        Command::Retrieve(a) => commands::retrieve(&a, seed),
        Command::Eval(a) => commands::eval(&a, seed),
        Command::Navsim(a) => commands::navsim(&a, seed),
        Command::Serve(a) => commands::serve(&a, seed),
        Command::Conformance(a) => commands::conformance(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
