use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use epimine::pipeline::{run, LoadedConfig, Stage, StageStatus};

#[derive(Parser)]
#[command(name = "epimine", version, about = "Disease-tweet mining pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true, default_value = "run.json")]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set cv.k=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, replacing `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fleiss' kappa over the annotator ratings.
    Agreement,
    /// Train the relevance/category cascade.
    Train,
    /// Cross-validate learners and analyse holdout errors.
    Evaluate,
    /// Classify the keyword-filtered corpus.
    Classify,
    /// Per-category topic models.
    Topics,
    /// Polarity and gender distribution.
    Profile,
    /// Run several stages in order.
    Run {
        /// Every stage.
        #[arg(long, conflicts_with = "stages")]
        all: bool,
        /// Comma-separated stage list.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
    },
}

fn stages_for(cmd: &Command) -> anyhow::Result<Vec<Stage>> {
    Ok(match cmd {
        Command::Agreement => vec![Stage::Agreement],
        Command::Train => vec![Stage::Train],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Classify => vec![Stage::Classify],
        Command::Topics => vec![Stage::Topics],
        Command::Profile => vec![Stage::Profile],
        Command::Run { all: true, .. } => Stage::ALL.to_vec(),
        Command::Run { stages, .. } if !stages.is_empty() => stages.clone(),
        Command::Run { .. } => bail!("`run` needs --all or --stages"),
    })
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    let stages = stages_for(&cli.command)?;
    let cfg = LoadedConfig::load(&cli.common.config, &cli.common.overrides)
        .with_context(|| format!("loading {}", cli.common.config.display()))?;
    let outcome = run(&cfg, &stages, cli.common.out.as_deref())?;
    for r in &outcome.stages {
        let status = match r.status {
            StageStatus::Ok => "ok",
            StageStatus::Failed => "FAILED",
            StageStatus::Skipped => "skipped",
        };
        println!("[{}] {status} ({} ms)", r.stage, r.elapsed_ms);
        for line in &r.summary {
            println!("  {line}");
        }
        if let Some(d) = &r.diagnostics {
            println!("  {d}");
        }
    }
    println!(
        "bundle {} in {}",
        if outcome.complete { "complete" } else { "partial" },
        outcome.out_dir.display()
    );
    Ok(outcome.complete)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
