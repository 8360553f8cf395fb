use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use wugkit::ingest::parse_label_table;
use wugkit::pipeline::{evaluate, run_pipeline, AnnotatorChoice, PipelineConfig, PipelineError};
use wugkit_service::Config;

#[derive(Parser)]
#[command(name = "wugkit", version, about = "Word usage graph annotation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pair, annotate, cluster and report on a uses file.
    Pipeline {
        uses: PathBuf,
        judgments: Option<PathBuf>,
        /// `random` or `stub:<table.csv>`.
        #[arg(long)]
        annotator: Option<String>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        restarts: Option<usize>,
        /// Timestamp for computational judgments (RFC 3339).
        #[arg(long)]
        timestamp: Option<DateTime<Utc>>,
    },
    /// Adjusted Rand index between two clusters files.
    Eval { predicted: PathBuf, gold: PathBuf },
    /// Run the REST service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|e| {
        PipelineError::Failure(wugkit::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    })
}

fn annotator(raw: &str) -> Result<AnnotatorChoice, PipelineError> {
    match raw.split_once(':') {
        None if raw == "random" => Ok(AnnotatorChoice::Random),
        Some(("stub", path)) => Ok(AnnotatorChoice::Stub(parse_label_table(&read(Path::new(path))?)?)),
        _ => Err(PipelineError::Validation(wugkit::Error::Document(format!(
            "unknown annotator {raw:?}; expected random or stub:<file>"
        )))),
    }
}

fn pipeline(
    uses: &Path,
    judgments: Option<&Path>,
    choice: Option<&str>,
    seed: u64,
    out: &Path,
    restarts: Option<usize>,
    timestamp: Option<DateTime<Utc>>,
) -> Result<(), PipelineError> {
    let mut config = PipelineConfig::new(seed);
    config.annotator = choice.map(annotator).transpose()?;
    if let Some(r) = restarts {
        config.restarts = r;
    }
    if let Some(t) = timestamp {
        config.timestamp = t;
    }
    let uses = read(uses)?;
    let judgments = judgments.map(read).transpose()?;
    let bundle = run_pipeline(&uses, judgments.as_deref(), &config)?;
    bundle.write_to(out).map_err(PipelineError::Failure)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Pipeline {
            uses,
            judgments,
            annotator,
            seed,
            out,
            restarts,
            timestamp,
        } => match pipeline(&uses, judgments.as_deref(), annotator.as_deref(), seed, &out, restarts, timestamp) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Eval { predicted, gold } => {
            let result = read(&predicted)
                .and_then(|p| read(&gold).map(|g| (p, g)))
                .and_then(|(p, g)| evaluate(&p, &g).map_err(PipelineError::Validation));
            match result {
                Ok(ari) => {
                    println!("{ari:.3}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Serve { config } => {
            let config = match Config::from_env(config.as_deref()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
            };
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(wugkit_service::serve(config)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
