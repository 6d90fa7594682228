use std::path::Path;

use crate::env::Env;
use crate::error::{Error, Result};
use crate::policy::Checkpoint;
use crate::trainer::{evaluate_greedy, EvalSummary, TrainConfig};

/// Greedy evaluation of a saved policy on the eval seeds of `config`.
pub fn run_eval(checkpoint: &Path, config: &TrainConfig) -> Result<EvalSummary> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let env = Env::build(&config.env_name, config.max_turns)?;
    if ckpt.env_name != config.env_name {
        return Err(Error::DimensionMismatch {
            what: "checkpoint environment",
            expected: config.env_name.clone(),
            found: ckpt.env_name,
        });
    }
    let expected = (env.state_count(), env.action_count());
    let found = (ckpt.params.state_count(), ckpt.params.action_count());
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: "policy table (states x actions)",
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        });
    }
    let seeds: Vec<u64> = (0..config.eval_num_seeds).map(|i| config.eval_seed_lo + i).collect();
    evaluate_greedy(&env, &ckpt.params, &seeds)
}
