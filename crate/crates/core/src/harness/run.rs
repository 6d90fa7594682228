use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{config_hash, to_config_text};
use crate::error::Result;
use crate::policy::Checkpoint;
use crate::trainer::{EvalSummary, MetricsRecord, TrainConfig, Trainer, Variant};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_ECHO_FILE: &str = "config.txt";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub env_name: String,
    pub variant: String,
    pub code_version: String,
    pub start_time_unix: u64,
}

impl RunManifest {
    pub fn new(config: &TrainConfig, variant: Variant) -> Self {
        Self {
            config: to_config_text(config),
            config_sha256: hex(&config_hash(config)),
            seeds: vec![config.seed],
            env_name: config.env_name.clone(),
            variant: variant.name().to_owned(),
            code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_owned(),
            start_time_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub records: Vec<MetricsRecord>,
    pub final_eval: EvalSummary,
}

#[derive(Serialize)]
struct EvalRecord {
    success_rate: f64,
    mean_turns: f64,
    episodes: usize,
}

#[derive(Serialize)]
struct TimingRecord {
    step: u64,
    wall_ms: f64,
}

/// Trains for `config.num_steps` steps, writing into `out_dir`:
///
/// * `manifest.json` and `config.txt`: what was run;
/// * `metrics.jsonl`: one record per step, flushed as it is written;
/// * `timings.jsonl`: wall time per step;
/// * `checkpoint.bin`: final policy;
/// * `eval.json`: greedy evaluation of the final policy.
///
/// On error, every record written so far is already on disk.
pub fn run_train(config: &TrainConfig, variant: Variant, out_dir: &Path) -> Result<TrainOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let manifest = RunManifest::new(config, variant);
    fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    fs::write(out_dir.join(CONFIG_ECHO_FILE), &manifest.config)?;

    let mut trainer = Trainer::new(config.clone(), variant)?;
    let mut metrics = BufWriter::new(File::create(out_dir.join(METRICS_FILE))?);
    let mut timings = BufWriter::new(File::create(out_dir.join(TIMINGS_FILE))?);
    let mut records = Vec::with_capacity(config.num_steps as usize);
    for _ in 0..config.num_steps {
        let record = trainer.step()?;
        serde_json::to_writer(&mut metrics, &record)?;
        metrics.write_all(b"\n")?;
        metrics.flush()?;
        serde_json::to_writer(
            &mut timings,
            &TimingRecord {
                step: record.step,
                wall_ms: record.wall_ms,
            },
        )?;
        timings.write_all(b"\n")?;
        timings.flush()?;
        records.push(record);
    }

    Checkpoint {
        env_name: config.env_name.clone(),
        config_hash: config_hash(config),
        params: trainer.params().clone(),
    }
    .save(&out_dir.join(CHECKPOINT_FILE))?;

    let final_eval = trainer.evaluate()?;
    let eval = EvalRecord {
        success_rate: final_eval.success_rate,
        mean_turns: final_eval.mean_turns,
        episodes: final_eval.episodes,
    };
    fs::write(out_dir.join(EVAL_FILE), serde_json::to_string(&eval)? + "\n")?;
    Ok(TrainOutcome {
        out_dir: out_dir.to_owned(),
        records,
        final_eval,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
