use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crl::report::config::SEED_ENV;
use crl::report::{run, Command, RunConfig, Settings};
use crl::Result;

/// Credit-risk detection: EDA, training, evaluation and comparison.
///
/// Exit codes: 0 success, 1 I/O error, 2 schema, data or configuration error.
#[derive(Parser)]
#[command(name = "crl", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Correlations, feature profiles and selection.
    Eda(Flags),
    /// Fit one classifier and write a .crl.json model file.
    Train(Flags),
    /// Score a model file against labelled data.
    Evaluate(Flags),
    /// Train and evaluate several classifiers on one shared split.
    Compare(Flags),
}

#[derive(Args)]
struct Flags {
    /// Input CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the split and the stochastic learners (falls back to CRL_SEED).
    #[arg(long)]
    seed: Option<String>,
    /// Training fraction in (0, 1).
    #[arg(long = "train-frac")]
    train_frac: Option<String>,
    /// Minimum |r| with the target for a feature to be kept.
    #[arg(long)]
    threshold: Option<String>,
    /// Comma-separated features removed after thresholding.
    #[arg(long)]
    drop: Option<String>,
    /// Classifier: svm, rf, dt or lr.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated classifiers for compare.
    #[arg(long)]
    models: Option<String>,
    /// Model file to write (train) or read (evaluate).
    #[arg(long = "model-file")]
    model_file: Option<PathBuf>,
    /// ROC input: scores or hard-labels.
    #[arg(long)]
    roc: Option<String>,
    /// Print machine-readable JSON on stdout.
    #[arg(long)]
    json: bool,
    /// Worker threads.
    #[arg(long)]
    threads: Option<String>,
    /// Flat key=value file mirroring these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter override as key=value (e.g. --set n-trees=200).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Tree depth limit for dt and rf.
    #[arg(long = "max-depth")]
    max_depth: Option<String>,
}

impl Flags {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                crl::CrlError::Config(format!("--set expects KEY=VALUE, got {kv:?}"))
            })?;
            flags.set(k, v)?;
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let pairs = [
            ("input", path(&self.input)),
            ("out", path(&self.out)),
            ("seed", self.seed.clone()),
            ("train-frac", self.train_frac.clone()),
            ("threshold", self.threshold.clone()),
            ("drop", self.drop.clone()),
            ("model", self.model.clone()),
            ("models", self.models.clone()),
            ("model-file", path(&self.model_file)),
            ("roc", self.roc.clone()),
            ("threads", self.threads.clone()),
            ("max-depth", self.max_depth.clone()),
            ("json", self.json.then(|| "true".to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                flags.set(k, v)?;
            }
        }
        s = s.overlay(&flags);
        Ok(s)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Eda(f) => (Command::Eda, f),
        Sub::Train(f) => (Command::Train, f),
        Sub::Evaluate(f) => (Command::Evaluate, f),
        Sub::Compare(f) => (Command::Compare, f),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = flags
        .settings()
        .and_then(|s| RunConfig::from_settings(&s, env_seed.as_deref()))
        .and_then(|cfg| run(command, &cfg).map(|o| (cfg, o)));
    match result {
        Ok((cfg, outcome)) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if cfg.json {
                match serde_json::to_string_pretty(&outcome.json) {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            } else {
                print!("{}", outcome.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error (exit {code}): {e}");
            ExitCode::from(code as u8)
        }
    }
}
