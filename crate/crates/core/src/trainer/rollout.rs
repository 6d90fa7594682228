use crate::env::{Env, EnvState};
use crate::error::Result;
use crate::policy::{PolicyParams, RngStream};
use crate::trajectory::Turn;

/// An unscored episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub turns: Vec<Turn>,
    pub success: bool,
}

/// Samples actions from `policy` until the episode ends.
pub fn run_episode(env: &Env, policy: &PolicyParams, task_seed: u64, rng: &mut RngStream) -> Result<Episode> {
    let mut state = env.reset(task_seed);
    let mut turns = Vec::new();
    loop {
        let (action, lp) = policy.sample_action(state, rng)?;
        let out = env.step(state, action)?;
        turns.push(Turn {
            state,
            action,
            behavior_log_prob: lp,
            tool_call_valid: out.tool_call_valid,
            well_formed: out.well_formed,
        });
        if out.done {
            return Ok(Episode {
                turns,
                success: out.success,
            });
        }
        state = out.next_state;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_turns: f64,
}

/// Greedy (argmax, lowest index on ties) rollouts without learning.
pub fn evaluate_greedy(env: &Env, policy: &PolicyParams, seeds: &[u64]) -> Result<EvalSummary> {
    let mut successes = 0usize;
    let mut turns = 0usize;
    for &seed in seeds {
        let mut state: EnvState = env.reset(seed);
        loop {
            let out = env.step(state, policy.greedy_action(state)?)?;
            turns += 1;
            if out.done {
                successes += usize::from(out.success);
                break;
            }
            state = out.next_state;
        }
    }
    let n = seeds.len().max(1) as f64;
    Ok(EvalSummary {
        episodes: seeds.len(),
        success_rate: successes as f64 / n,
        mean_turns: turns as f64 / n,
    })
}
