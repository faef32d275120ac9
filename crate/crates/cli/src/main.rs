mod commands;
mod config;
mod error;
mod report;

use clap::{Parser, Subcommand};
use config::{Loaded, Overrides};
use error::{CliError, CliResult, ErrorKind};
use std::path::PathBuf;
use std::process::ExitCode;

/// Semantic object accuracy and distribution metrics for text-to-image
/// models.
#[derive(Debug, Parser)]
#[command(name = "soa-bench", version)]
struct Cli {
    /// Run configuration (TOML key = value file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Detection score threshold; overrides the config.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Seed for manifest sampling and R-precision; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the captions that imply each label.
    FilterCaptions,
    /// Build the evaluation manifest from the caption corpus.
    BuildManifest,
    /// SOA-C, SOA-I and their IoU variants from detector output.
    Soa,
    /// Fréchet distance between two feature files.
    Fid,
    /// Inception score from softmax outputs.
    Is,
    /// R-precision from image and caption embeddings.
    Rprec,
    /// Merge metric reports into one table.
    Report {
        /// Additional report files.
        reports: Vec<PathBuf>,
    },
    /// Debug: render an object-pathway accumulation as a PGM image.
    RenderPathway {
        #[arg(long)]
        placements: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SOA_BENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::new(ErrorKind::Usage, format!("SOA_BENCH_THREADS={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::internal)
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    if let Command::RenderPathway { placements, output } = &cli.command {
        return commands::render_pathway(placements, output);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::new(ErrorKind::Usage, "--config is required"))?;
    let overrides = Overrides {
        threshold: cli.threshold,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let loaded = Loaded::from_file(path, &overrides)?;
    match &cli.command {
        Command::FilterCaptions => commands::filter_captions(&loaded),
        Command::BuildManifest => commands::build(&loaded),
        Command::Soa => commands::soa(&loaded),
        Command::Fid => commands::fid(&loaded),
        Command::Is => commands::inception(&loaded),
        Command::Rprec => commands::rprec(&loaded),
        Command::Report { reports } => commands::report(&loaded, reports),
        Command::RenderPathway { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::new(ErrorKind::Usage, e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::debug!("{err}");
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
