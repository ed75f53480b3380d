use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::error;

use infodemic::config::PipelineConfig;
use infodemic::export::{run_pipeline, ArtifactManifest, PipelineError, RunOptions, Stage};
use infodemic::synth::{write_corpus, SynthParams};
use infodemic::time::Day;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "infodemic",
    version,
    about = "Misinformation, cascade, sentiment and trend analytics over tweet corpora"
)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the artifact output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Re-run stages even when their inputs are unchanged.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter and deduplicate the input files into the corpus store.
    Ingest,
    /// Resolve tweet locations.
    Geo,
    /// Load the source catalogs.
    Label,
    /// Build the engagement graph and label cascades.
    Cascades,
    /// Dataset stats, misinformation volume, sources and narratives.
    Analyze,
    /// Country/day sentiment and policy hashtag panels.
    Sentiment,
    /// Topic clustering with representative tweets.
    Topics,
    /// Emerging hashtags and per-country activity.
    Trends,
    /// Write the artifact manifest.
    Export,
    /// Run every stage.
    All,
    /// Check the manifest hashes under the output directory.
    Verify,
    /// Write a synthetic NDJSON corpus.
    Generate {
        #[arg(long, default_value_t = 10_000)]
        tweets: usize,
        #[arg(long, default_value_t = 31)]
        days: u32,
        /// First day, YYYY-MM-DD.
        #[arg(long, default_value = "2020-03-01")]
        start: Day,
        /// Destination file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Ingest => Stage::Ingest,
            Command::Geo => Stage::Geo,
            Command::Label => Stage::Label,
            Command::Cascades => Stage::Cascades,
            Command::Analyze => Stage::Analyze,
            Command::Sentiment => Stage::Sentiment,
            Command::Topics => Stage::Topics,
            Command::Trends => Stage::Trends,
            Command::Export | Command::All => Stage::Export,
            Command::Verify | Command::Generate { .. } => return None,
        })
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, String> {
    let path = cli.config.as_ref().ok_or("--config is required")?;
    let mut cfg = PipelineConfig::load(path).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn generate(
    cli: &Cli,
    tweets: usize,
    days: u32,
    start: Day,
    output: Option<&PathBuf>,
) -> anyhow::Result<()> {
    let params = SynthParams {
        n_tweets: tweets,
        days,
        start,
        seed: cli.seed.unwrap_or(0),
        ..SynthParams::default()
    };
    let summary = match output {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_corpus(&params, file)?
        }
        None => write_corpus(&params, std::io::stdout().lock())?,
    };
    eprintln!(
        "wrote {} lines ({} tweets, {} duplicates, {} malformed)",
        summary.lines, summary.tweets, summary.duplicates, summary.malformed
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Command::Generate {
        tweets,
        days,
        start,
        output,
    } = &cli.command
    {
        return match generate(&cli, *tweets, *days, *start, output.as_ref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                error!("{e:#}");
                ExitCode::from(EXIT_STAGE)
            }
        };
    }

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let Some(stage) = cli.command.stage() else {
        let failed = ArtifactManifest::load(&cfg.out).map(|m| m.verify(&cfg.out));
        return match failed {
            Ok(bad) if bad.is_empty() => {
                println!("manifest ok");
                ExitCode::SUCCESS
            }
            Ok(bad) => {
                for name in bad {
                    println!("mismatch: {name}");
                }
                ExitCode::from(EXIT_STAGE)
            }
            Err(e) => {
                error!("{e}");
                ExitCode::from(EXIT_STAGE)
            }
        };
    };

    let opts = RunOptions {
        workers: cli.workers,
        force: cli.force,
    };
    match run_pipeline(&cfg, stage, opts) {
        Ok(summary) => {
            for o in &summary.outcomes {
                println!(
                    "{:<10} {}",
                    o.stage.name(),
                    if o.skipped { "skipped" } else { "done" }
                );
            }
            if let Some(m) = summary.manifest {
                println!("manifest: {} files", m.files.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let PipelineError::Stage { completed, .. } = &e {
                let done: Vec<&str> = completed.iter().map(|s| s.name()).collect();
                error!("{e} (completed: {})", done.join(", "));
            } else {
                error!("{e}");
            }
            ExitCode::from(EXIT_STAGE)
        }
    }
}
