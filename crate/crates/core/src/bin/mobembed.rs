//! `mobembed` command-line entry point. Logs and the run summary go to
//! stderr; data goes only to files under the output directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mobembed_core::metrics::DistanceMode;
use mobembed_core::pipeline::{run_all, run_stage, summary, PipelineConfig, Stage};
use mobembed_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mobembed", version, about = "Dynamic node embeddings for group-meeting mobility traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a group-meeting trace.
    Generate(Opts),
    /// Build per-window contact graphs and topology metrics.
    Graphs(Opts),
    /// Sample biased random walks on every window.
    Walks(Opts),
    /// Fit the aligned embedding sequence.
    Embed(Opts),
    /// Compute mobility and importance analytics.
    Analyze(Opts),
    /// Run every stage in order.
    All(Opts),
    /// Check the configuration and report every problem found.
    Validate(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Minimum continuous in-range time for a contact, seconds.
    #[arg(long)]
    min_contact_s: Option<f64>,
    /// Also write the PPMI matrices in the embed stage.
    #[arg(long)]
    dump_ppmi: bool,
    /// Window pairs for cosine-distance statistics: forward or consecutive.
    #[arg(long)]
    distance_mode: Option<DistanceMode>,
}

impl Opts {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(m) = self.min_contact_s {
            cfg.graphs.min_contact_s = m;
        }
        if self.dump_ppmi {
            cfg.embed.dump_ppmi = true;
        }
        if let Some(mode) = self.distance_mode {
            cfg.analyze.distance_mode = mode;
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<()> {
    let (stage, opts) = match command {
        Command::Generate(o) => (Some(Stage::Generate), o),
        Command::Graphs(o) => (Some(Stage::Graphs), o),
        Command::Walks(o) => (Some(Stage::Walks), o),
        Command::Embed(o) => (Some(Stage::Embed), o),
        Command::Analyze(o) => (Some(Stage::Analyze), o),
        Command::All(o) => (None, o),
        Command::Validate(o) => {
            let cfg = o.load()?;
            cfg.validate()?;
            eprintln!("configuration is valid (hash {})", cfg.content_hash());
            return Ok(());
        }
    };
    let cfg = opts.load()?;
    let outcomes = match stage {
        Some(s) => vec![run_stage(s, &cfg)?],
        None => run_all(&cfg)?,
    };
    eprint!("{}", summary(&outcomes));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        1
    } else {
        2
    }
}
