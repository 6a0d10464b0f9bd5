use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cldfa_cli::commands;
use cldfa_cli::config::{ExperimentConfig, RawConfig};
use cldfa_cli::error::{CliError, Result};

/// Cross-lingual text classification by knowledge distillation with
/// adversarial feature adaptation.
#[derive(Parser)]
#[command(name = "cldfa", version, about)]
struct Cli {
    /// Experiment config file ([section] / key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key: --set section.key=value (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Override run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override run.out (the output directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic bilingual corpus into the output directory.
    Synth,
    /// Step 1: train the source-language classifier.
    TrainSource,
    /// Step 2: soft labels plus target-language distillation.
    Distill,
    /// Fine-tune the distilled model on a labeled target budget.
    Finetune,
    /// Accuracy report of one or more checkpoints on a labeled split.
    Eval,
    /// Feature dump, 2-D projection and divergence of two splits.
    Project,
    /// The whole pipeline: synth (if configured), both steps, evaluation.
    RunCldfa,
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for assignment in &cli.set {
        raw.set(assignment)?;
    }
    if let Some(seed) = cli.seed {
        raw.values.insert("run.seed".into(), seed.to_string());
    }
    if let Some(out) = &cli.out {
        raw.values
            .insert("run.out".into(), out.display().to_string());
    }
    ExperimentConfig::resolve(&raw)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match cli.command {
        Command::Synth => commands::cmd_synth(&cfg),
        Command::TrainSource => commands::cmd_train_source(&cfg),
        Command::Distill => commands::cmd_distill(&cfg),
        Command::Finetune => commands::cmd_finetune(&cfg),
        Command::Eval => commands::cmd_eval(&cfg),
        Command::Project => commands::cmd_project(&cfg),
        Command::RunCldfa => commands::cmd_run_cldfa(&cfg).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = err.exit_code();
            debug_assert!(matches!(code, 1..=3));
            ExitCode::from(code as u8)
        }
    }
}
