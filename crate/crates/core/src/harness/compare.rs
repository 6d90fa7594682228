use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::run::run_train;
use crate::error::{Error, Result};
use crate::trainer::{TrainConfig, Variant};

/// Outcome of one (variant, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareCell {
    pub seed: u64,
    /// Final greedy success rate, `None` if the run failed.
    pub final_success: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Training success rate per step.
    pub success_series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub variant: String,
    /// Median final success over the runs that completed.
    pub median_final_success: Option<f64>,
    pub cells: Vec<CompareCell>,
    /// Per-step training success rate averaged over completed runs.
    pub mean_success_series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub env_name: String,
    pub num_steps: u64,
    pub rows: Vec<CompareRow>,
}

impl CompareSummary {
    pub fn row(&self, variant: Variant) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.variant == variant.name())
    }

    /// Aligned plain-text table, one row per variant.
    pub fn to_table(&self) -> String {
        let seeds: Vec<u64> = self
            .rows
            .first()
            .map(|r| r.cells.iter().map(|c| c.seed).collect())
            .unwrap_or_default();
        let mut header = vec!["variant".to_owned(), "median".to_owned()];
        header.extend(seeds.iter().map(|s| format!("seed={s}")));
        let mut lines = vec![header];
        for row in &self.rows {
            let mut line = vec![row.variant.clone(), fmt_rate(row.median_final_success)];
            line.extend(row.cells.iter().map(|c| fmt_rate(c.final_success)));
            lines.push(line);
        }
        let cols = lines.iter().map(Vec::len).max().unwrap_or(0);
        let widths: Vec<usize> = (0..cols)
            .map(|i| lines.iter().filter_map(|l| l.get(i)).map(String::len).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &lines {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "failed".to_owned(), |v| format!("{v:.3}"))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Trains every (variant, seed) pair, concurrently, each into
/// `out_dir/<variant>/seed-<seed>`, then writes `summary.json`,
/// `series.jsonl` and `summary.txt` into `out_dir`. A failed run is
/// recorded in its cell and does not stop the others.
pub fn run_compare(config: &TrainConfig, variants: &[Variant], seeds: &[u64], out_dir: &Path) -> Result<CompareSummary> {
    if variants.is_empty() {
        return Err(Error::config("variant", "at least one variant is required"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seed", "at least one seed is required"));
    }
    config.validate()?;
    let mut variants = variants.to_vec();
    variants.sort_by_key(|v| v.name());
    variants.dedup();
    fs::create_dir_all(out_dir)?;

    let jobs: Vec<(Variant, u64)> = variants.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let cells: Vec<CompareCell> = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            let dir = out_dir.join(variant.name()).join(format!("seed-{seed}"));
            match run_train(&cfg, variant, &dir) {
                Ok(o) => CompareCell {
                    seed,
                    final_success: Some(o.final_eval.success_rate),
                    error: None,
                    success_series: o.records.iter().map(|r| r.success_rate).collect(),
                },
                Err(e) => CompareCell {
                    seed,
                    final_success: None,
                    error: Some(e.to_string()),
                    success_series: Vec::new(),
                },
            }
        })
        .collect();

    let mut cells = cells.into_iter();
    let rows: Vec<CompareRow> = variants
        .iter()
        .map(|v| {
            let cells: Vec<CompareCell> = cells.by_ref().take(seeds.len()).collect();
            let finals: Vec<f64> = cells.iter().filter_map(|c| c.final_success).collect();
            let done: Vec<&CompareCell> = cells.iter().filter(|c| c.final_success.is_some()).collect();
            let steps = done.iter().map(|c| c.success_series.len()).min().unwrap_or(0);
            let mean_success_series = (0..steps)
                .map(|t| done.iter().map(|c| c.success_series[t]).sum::<f64>() / done.len() as f64)
                .collect();
            CompareRow {
                variant: v.name().to_owned(),
                median_final_success: median(&finals),
                cells,
                mean_success_series,
            }
        })
        .collect();

    let summary = CompareSummary {
        env_name: config.env_name.clone(),
        num_steps: config.num_steps,
        rows,
    };
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let mut series = String::new();
    for row in &summary.rows {
        for (i, s) in row.mean_success_series.iter().enumerate() {
            let rec = serde_json::json!({ "variant": row.variant, "step": i + 1, "success_rate": s });
            series.push_str(&rec.to_string());
            series.push('\n');
        }
    }
    fs::write(out_dir.join("series.jsonl"), series)?;
    fs::write(out_dir.join("summary.txt"), summary.to_table())?;
    Ok(summary)
}
