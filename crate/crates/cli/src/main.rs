//! `psihash`: hash datasets with structured binary embeddings, estimate
//! pairwise angles, validate subset structures, compute the P-chromatic
//! number and run Monte-Carlo experiments.
//!
//! Exit codes: 0 ok, 1 validation failed, 2 malformed input or config,
//! 3 invalid pipeline settings, 4 exact-mode vertex cap exceeded,
//! 5 experiment check failed. Data goes to stdout, diagnostics to stderr.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psihash::{Family, Quantizer, Variant};

use crate::config::CliConfig;

#[derive(Debug, Parser)]
#[command(
    name = "psihash",
    version,
    about = "Structured binary embeddings for angular hashing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hash a vector file (CSV or raw f64) into a PSIH file.
    Hash(HashArgs),
    /// Estimate normalized angles between rows of a PSIH file.
    Estimate(EstimateArgs),
    /// Check a subset-structure JSON against the regularity constraints.
    Validate(ValidateArgs),
    /// Compute the P-chromatic number of a structure.
    Chroma(ChromaArgs),
    /// Run a bias or concentration experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliVariant {
    Extended,
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliFamily {
    Toeplitz,
    Circulant,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Csv,
    RawF64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Greedy,
}

/// Flags describing a pipeline or projection structure.
#[derive(Debug, Args)]
struct PipelineFlags {
    #[arg(long, value_enum)]
    variant: Option<CliVariant>,
    #[arg(long, value_enum)]
    family: Option<CliFamily>,
    /// Number of hash bits (rows of the projection).
    #[arg(long)]
    k: Option<usize>,
    /// Input dimension.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `sign`, `tanh:<beta>` or `threshold:<tau>`.
    #[arg(long, value_parser = parse_quantizer)]
    quantizer: Option<Quantizer>,
    /// Subset-structure JSON for the general family.
    #[arg(long)]
    structure: Option<PathBuf>,
    /// JSON config with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HashArgs {
    /// Vector file: `.csv` or raw little-endian f64 with a `<file>.json` sidecar.
    input: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, value_enum)]
    input_format: Option<InputFormat>,
    /// Output PSIH file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// PSIH hash file.
    input: Option<PathBuf>,
    /// Row pair `i,j`; repeatable.
    #[arg(long = "pair", value_parser = parse_pair)]
    pairs: Vec<(usize, usize)>,
    /// Every pair `i < j`.
    #[arg(long)]
    all_pairs: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Subset-structure JSON.
    structure: Option<PathBuf>,
    #[arg(long = "structure", id = "structure_flag")]
    structure_flag: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChromaArgs {
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Vertex cap for exact mode.
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; `.csv` and `.json` are written next to each other.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format summarised on stdout; both files are always written.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn parse_quantizer(s: &str) -> Result<Quantizer, String> {
    s.parse().map_err(|e: psihash::Error| e.to_string())
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected i,j, got {s:?}"))?;
    let idx = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad row index {x:?}"))
    };
    Ok((idx(a)?, idx(b)?))
}

impl From<CliVariant> for Variant {
    fn from(v: CliVariant) -> Self {
        match v {
            CliVariant::Extended => Variant::Extended,
            CliVariant::Short => Variant::Short,
        }
    }
}

impl From<CliFamily> for Family {
    fn from(f: CliFamily) -> Self {
        match f {
            CliFamily::Toeplitz => Family::Toeplitz,
            CliFamily::Circulant => Family::Circulant,
            CliFamily::General => Family::General,
        }
    }
}

impl PipelineFlags {
    fn to_config(&self) -> CliConfig {
        CliConfig {
            variant: self.variant.map(Into::into),
            family: self.family.map(Into::into),
            k: self.k,
            n: self.n,
            seed: self.seed,
            quantizer: self.quantizer,
            structure: self.structure.clone(),
            ..Default::default()
        }
    }
}

fn input_format_name(f: InputFormat) -> String {
    match f {
        InputFormat::Csv => "csv",
        InputFormat::RawF64 => "raw_f64",
    }
    .to_string()
}

fn run(cli: Cli) -> Result<(), exit::CliError> {
    match cli.command {
        Command::Hash(a) => {
            let flags = CliConfig {
                input: a.input,
                input_format: a.input_format.map(input_format_name),
                out: a.out,
                ..a.pipeline.to_config()
            };
            commands::hash(CliConfig::load(a.pipeline.config.as_deref())?.overridden_by(flags))
        }
        Command::Estimate(a) => {
            let flags = CliConfig {
                input: a.input,
                pairs: (!a.pairs.is_empty()).then_some(a.pairs),
                all_pairs: a.all_pairs.then_some(true),
                out: a.out,
                ..Default::default()
            };
            commands::estimate(CliConfig::load(a.config.as_deref())?.overridden_by(flags))
        }
        Command::Validate(a) => {
            let flags = CliConfig {
                structure: a.structure.or(a.structure_flag),
                out: a.out,
                ..Default::default()
            };
            commands::validate(CliConfig::load(a.config.as_deref())?.overridden_by(flags))
        }
        Command::Chroma(a) => {
            let flags = CliConfig {
                mode: a.mode.map(|m| match m {
                    Mode::Exact => "exact".to_string(),
                    Mode::Greedy => "greedy".to_string(),
                }),
                cap: a.cap,
                out: a.out,
                ..a.pipeline.to_config()
            };
            commands::chroma(CliConfig::load(a.pipeline.config.as_deref())?.overridden_by(flags))
        }
        Command::Experiment(a) => commands::experiment(
            &a.config,
            a.seed,
            a.out,
            a.format
                .map_or(psihash::experiments::ReportFormat::Json, |f| match f {
                    OutputFormat::Csv => psihash::experiments::ReportFormat::Csv,
                    OutputFormat::Json => psihash::experiments::ReportFormat::Json,
                }),
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code as i32);
    }
}
