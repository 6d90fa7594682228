//! Composite trajectory reward and the two cosine curricula.
//!
//! The total reward is `outcome + mu * tool_call + format`, where `mu`
//! decays from 1 to 0 over `T_decay` steps. The self-imitation weight
//! `gamma` rises from 0 to 1 over `T_warmup` steps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_BONUS: f64 = 0.1;
pub const TOOL_CALL_UNIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub outcome: f64,
    pub tool_call: f64,
    pub format: f64,
    pub mu: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub t_warmup: u64,
    pub t_decay: u64,
}

impl ScheduleConfig {
    pub fn new(t_warmup: u64, t_decay: u64) -> Result<Self> {
        if t_warmup == 0 {
            return Err(Error::config("T_warmup", "must be >= 1"));
        }
        if t_decay == 0 {
            return Err(Error::config("T_decay", "must be >= 1"));
        }
        Ok(Self { t_warmup, t_decay })
    }

    pub fn gamma(&self, t_iter: u64) -> f64 {
        gamma(t_iter, self.t_warmup)
    }

    pub fn mu(&self, t_iter: u64) -> f64 {
        mu(t_iter, self.t_decay)
    }
}

/// +1 on success, -1 otherwise (including timeouts).
pub fn outcome_reward(success: bool) -> f64 {
    if success {
        1.0
    } else {
        -1.0
    }
}

/// `min(1, 0.1 * n)` over valid tool-call turns.
pub fn tool_call_reward(n_tool_call: i64) -> Result<f64> {
    if n_tool_call < 0 {
        return Err(Error::contract(format!(
            "tool-call count must be non-negative, got {n_tool_call}"
        )));
    }
    Ok((TOOL_CALL_UNIT * n_tool_call as f64).min(1.0))
}

/// 0.1 if every turn is well formed. An empty trajectory counts as well formed.
pub fn format_reward<I: IntoIterator<Item = bool>>(well_formed: I) -> f64 {
    if well_formed.into_iter().all(|ok| ok) {
        FORMAT_BONUS
    } else {
        0.0
    }
}

/// Self-imitation warm-up: `(1 - cos(pi t / T)) / 2` up to `T`, then 1.
pub fn gamma(t_iter: u64, t_warmup: u64) -> f64 {
    if t_iter <= t_warmup {
        0.5 * (1.0 - (PI * t_iter as f64 / t_warmup as f64).cos())
    } else {
        1.0
    }
}

/// Tool-call reward decay: `(cos(pi t / T) + 1) / 2` up to `T`, then 0.
pub fn mu(t_iter: u64, t_decay: u64) -> f64 {
    if t_iter <= t_decay {
        0.5 * ((PI * t_iter as f64 / t_decay as f64).cos() + 1.0)
    } else {
        0.0
    }
}

pub fn compose(outcome: f64, tool_call: f64, format: f64, mu: f64) -> RewardBreakdown {
    RewardBreakdown {
        outcome,
        tool_call,
        format,
        mu,
        total: outcome + mu * tool_call + format,
    }
}
