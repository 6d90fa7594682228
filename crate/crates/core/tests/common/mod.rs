#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sil_core::env::{ActionId, Env, EnvState};
use sil_core::policy::log_softmax_at;
use sil_core::trainer::{Episode, Sample};
use sil_core::{PolicyParams, Turn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_params(rng: &mut ChaCha8Rng, states: usize, actions: usize) -> PolicyParams {
    let logits = (0..states * actions).map(|_| rng.gen_range(-2.0..2.0)).collect();
    PolicyParams::from_logits(states, actions, logits, 0).unwrap()
}

/// Owned backing data for a [`Sample`].
#[derive(Debug, Clone)]
pub struct OwnedSample {
    pub turns: Vec<Turn>,
    pub loss_mask: Vec<bool>,
    pub advantage: f64,
    pub clip_mask: Option<Vec<bool>>,
}

impl OwnedSample {
    pub fn view(&self) -> Sample<'_> {
        Sample {
            turns: &self.turns,
            loss_mask: &self.loss_mask,
            advantage: self.advantage,
            clip_mask: self.clip_mask.as_deref(),
        }
    }
}

pub fn views(samples: &[OwnedSample]) -> Vec<Sample<'_>> {
    samples.iter().map(OwnedSample::view).collect()
}

/// Random sequences over `params`' table whose behaviour log-probs sit
/// `exp(shift)` away from the current policy, `shift` drawn from `shift_range`.
pub fn random_samples(
    rng: &mut ChaCha8Rng,
    params: &PolicyParams,
    count: usize,
    max_len: usize,
    shift_range: std::ops::Range<f64>,
    mask_prob: f64,
) -> Vec<OwnedSample> {
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let turns: Vec<Turn> = (0..len)
                .map(|t| {
                    let s = rng.gen_range(0..params.state_count());
                    let a = rng.gen_range(0..params.action_count());
                    let lp = log_softmax_at(params.row(s), a).unwrap();
                    let behavior = (lp + rng.gen_range(shift_range.clone())).min(0.0);
                    Turn {
                        state: EnvState {
                            state_index: s,
                            turn: t as u32,
                        },
                        action: ActionId(a),
                        behavior_log_prob: behavior,
                        tool_call_valid: true,
                        well_formed: true,
                    }
                })
                .collect();
            let loss_mask = (0..len).map(|_| !rng.gen_bool(mask_prob)).collect();
            OwnedSample {
                turns,
                loss_mask,
                advantage: rng.gen_range(-2.0..2.0),
                clip_mask: None,
            }
        })
        .collect()
}

/// Plays `actions` from `task_seed`, recording `params`' log-probs as the
/// behaviour policy. Stops early if the episode ends.
pub fn scripted_episode(env: &Env, params: &PolicyParams, task_seed: u64, actions: &[usize]) -> Episode {
    let mut state = env.reset(task_seed);
    let mut turns = Vec::new();
    for &a in actions {
        let action = ActionId(a);
        let out = env.step(state, action).unwrap();
        turns.push(Turn {
            state,
            action,
            behavior_log_prob: params.log_prob(state, action).unwrap(),
            tool_call_valid: out.tool_call_valid,
            well_formed: out.well_formed,
        });
        if out.done {
            return Episode {
                turns,
                success: out.success,
            };
        }
        state = out.next_state;
    }
    Episode { turns, success: false }
}

/// Shortest CalcChain action plan reaching `target` from 0, then SUBMIT.
pub fn calc_chain_plan(target: u8) -> Vec<usize> {
    use sil_core::env::CalcChain;
    use std::collections::{HashMap, VecDeque};
    let ops = [CalcChain::ADD1, CalcChain::ADD2, CalcChain::MUL2];
    let apply = |acc: u8, op: usize| -> u8 {
        let v = match op {
            CalcChain::ADD1 => acc + 1,
            CalcChain::ADD2 => acc + 2,
            _ => acc * 2,
        };
        v.min(CalcChain::ACC_MAX)
    };
    let mut prev: HashMap<u8, (u8, usize)> = HashMap::new();
    let mut queue = VecDeque::from([0u8]);
    while let Some(acc) = queue.pop_front() {
        if acc == target {
            break;
        }
        for op in ops {
            let next = apply(acc, op);
            if next != 0 && !prev.contains_key(&next) {
                prev.insert(next, (acc, op));
                queue.push_back(next);
            }
        }
    }
    let mut plan = vec![CalcChain::SUBMIT];
    let mut cur = target;
    while cur != 0 {
        let (p, op) = prev[&cur];
        plan.push(op);
        cur = p;
    }
    plan.reverse();
    plan
}
