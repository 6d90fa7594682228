//! `sil-lab`: train, evaluate and compare self-imitation policy-gradient
//! variants on the tabular tool environments.
//!
//! Exit status is 0 on success, 2 for configuration errors and 1 for
//! everything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sil_core::harness::{self, CHECKPOINT_FILE};
use sil_core::policy::Checkpoint;
use sil_core::{Error, Result, TrainConfig, Variant};

#[derive(Parser)]
#[command(name = "sil-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "SIL_LAB_OUT_DIR", default_value = "runs")]
    out: PathBuf,
    /// Override `num_steps`.
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one variant with one seed.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "spear")]
        variant: String,
        /// Override the config `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Greedy evaluation of a checkpoint on the configured eval seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Accepted for symmetry with `train`; greedy evaluation does not sample.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train every variant under every seed and summarize final success.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated variants.
        #[arg(long, value_delimiter = ',', default_value = "grpo,drbot,spear")]
        variant: Vec<String>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seed: Vec<u64>,
    },
    /// Measure omega bounds on one rollout batch and write them as a config fragment.
    CalibrateOmega {
        #[command(flatten)]
        common: Common,
        /// Policy to measure; the all-zero initial policy when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(common: &Common, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(path) => harness::load_config(path)?,
        None => TrainConfig::for_env("calc_chain")?,
    };
    if let Some(steps) = common.steps {
        cfg.num_steps = steps;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, variant, seed } => {
            let cfg = load(&common, seed)?;
            let variant = Variant::parse(&variant)?;
            let outcome = harness::run_train(&cfg, variant, &common.out)?;
            println!(
                "{variant} seed={} steps={} final_success={:.3} out={}",
                cfg.seed,
                outcome.records.len(),
                outcome.final_eval.success_rate,
                common.out.display()
            );
        }
        Command::Eval { common, checkpoint, seed } => {
            let cfg = load(&common, seed)?;
            let path = checkpoint.unwrap_or_else(|| common.out.join(CHECKPOINT_FILE));
            let summary = harness::run_eval(&path, &cfg)?;
            println!(
                "{{\"success_rate\":{:?},\"mean_turns\":{:?},\"episodes\":{}}}",
                summary.success_rate, summary.mean_turns, summary.episodes
            );
        }
        Command::Compare { common, variant, seed } => {
            let cfg = load(&common, None)?;
            let variants = variant.iter().map(|v| Variant::parse(v.trim())).collect::<Result<Vec<_>>>()?;
            let summary = harness::run_compare(&cfg, &variants, &seed, &common.out)?;
            print!("{}", summary.to_table());
        }
        Command::CalibrateOmega { common, checkpoint, seed } => {
            let cfg = load(&common, seed)?;
            let policy = checkpoint.as_deref().map(load_policy).transpose()?;
            let calibration = harness::calibrate_omega(&cfg, policy)?;
            std::fs::create_dir_all(&common.out)?;
            let fragment = calibration.to_config_text();
            std::fs::write(common.out.join("omega.conf"), &fragment)?;
            print!("{fragment}");
        }
    }
    Ok(())
}

fn load_policy(path: &Path) -> Result<sil_core::PolicyParams> {
    Ok(Checkpoint::load(path)?.params)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sil-lab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
