//! `ltgcd gen | train | eval | sweep`.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::datagen::{generate_mixture, load_embeddings, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::harness::output::{metrics_row, train_log_csv, METRICS_HEADER};
use crate::harness::sweep::{sweep, ExperimentPlan};
use crate::harness::train::train_one;
use crate::model::ModelSnapshot;
use crate::rng::{RngService, STREAM_SPLIT};

#[derive(Debug, Parser)]
#[command(name = "ltgcd", about = "Long-tailed category discovery on embeddings", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (CSV + manifest)
    Gen(CommonArgs),
    /// Train and evaluate one run
    Train(CommonArgs),
    /// Evaluate a checkpoint on a dataset
    Eval(CommonArgs),
    /// Run the rho x alpha x beta x seed grid
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dataset manifest (JSON); synthetic data from the config when omitted
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl CommonArgs {
    /// Config file plus flag overrides. Single-value flags also replace the
    /// matching sweep list.
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.hp.seed = s;
            cfg.seeds = vec![s];
        }
        if let Some(r) = self.rho {
            cfg.split.rho = r;
            cfg.rhos = vec![r];
        }
        if let Some(a) = self.alpha {
            cfg.hp.alpha = a;
            cfg.alphas = vec![a];
        }
        if let Some(b) = self.beta {
            cfg.hp.beta = b;
            cfg.betas = vec![b];
        }
        if let Some(e) = self.epochs {
            cfg.hp.epochs = e;
        }
        if let Some(b) = self.batch {
            cfg.hp.batch_size = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn dataset(&self, cfg: &ExperimentConfig) -> Result<EmbeddingDataset> {
        match &self.dataset {
            Some(p) => load_embeddings(p),
            None => generate_mixture(&cfg.split, cfg.sep, &mut RngService::derive_stream(cfg.hp.seed, STREAM_SPLIT)),
        }
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Error::io(p, e))
}

fn cmd_gen(args: &CommonArgs) -> Result<()> {
    let cfg = args.config()?;
    let data = args.dataset(&cfg)?;
    let manifest = data.write(&args.out, "dataset")?;
    println!("wrote {} rows to {}", data.len(), manifest.display());
    Ok(())
}

fn cmd_train(args: &CommonArgs) -> Result<()> {
    let cfg = args.config()?;
    let data = args.dataset(&cfg)?;
    let record = train_one(&data, &cfg.hp, &cfg.train)?;
    create_dir(&args.out)?;
    write(&args.out.join("config.ini"), &cfg.to_ini())?;
    write(&args.out.join("train_log.csv"), &train_log_csv(&record))?;
    record.snapshot.save(&args.out.join("checkpoint.json"))?;
    if let Some(reason) = &record.aborted {
        return Err(Error::Numerical(format!("run aborted: {reason}")));
    }
    let metrics = record.metrics.as_ref().expect("completed run has metrics");
    let row = metrics_row(metrics, cfg.split.rho, cfg.hp.alpha, cfg.hp.beta);
    write(&args.out.join("metrics.csv"), &format!("{METRICS_HEADER}\n{row}\n"))?;
    println!("{METRICS_HEADER}\n{row}");
    Ok(())
}

fn cmd_eval(args: &CommonArgs) -> Result<()> {
    let path = args
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::invalid("--checkpoint", "required for eval"))?;
    let snapshot = ModelSnapshot::load(path)?;
    let cfg = args.config()?;
    let data = args.dataset(&cfg)?;
    if data.dim() != snapshot.head.input_dim() {
        return Err(Error::invalid(
            "dataset",
            format!("dimension {} but checkpoint expects {}", data.dim(), snapshot.head.input_dim()),
        ));
    }
    let metrics = evaluate(&snapshot, &data, cfg.hp.seed, cfg.train.eval_restarts)?;
    let row = metrics_row(&metrics, cfg.split.rho, cfg.hp.alpha, cfg.hp.beta);
    create_dir(&args.out)?;
    write(&args.out.join("metrics.csv"), &format!("{METRICS_HEADER}\n{row}\n"))?;
    println!("{METRICS_HEADER}\n{row}");
    Ok(())
}

fn cmd_sweep(args: &CommonArgs) -> Result<()> {
    let plan = ExperimentPlan {
        config: args.config()?,
        out_dir: args.out.clone(),
    };
    let result = sweep(&plan)?;
    let failed = result.runs.iter().filter(|r| r.failure().is_some()).count();
    println!("{} runs, {failed} failed; results in {}", result.runs.len(), plan.out_dir.display());
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
