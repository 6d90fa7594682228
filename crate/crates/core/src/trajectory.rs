use serde::{Deserialize, Serialize};

use crate::env::{ActionId, EnvState};
use crate::reward::RewardBreakdown;

/// One interaction turn: the state seen, the action taken, and the
/// log-probability the behaviour policy assigned to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub state: EnvState,
    pub action: ActionId,
    pub behavior_log_prob: f64,
    pub tool_call_valid: bool,
    pub well_formed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_seed: u64,
    pub turns: Vec<Turn>,
    pub success: bool,
    pub reward: RewardBreakdown,
    /// Per-turn loss mask; `false` turns contribute no gradient.
    pub loss_mask: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn n_tool_call(&self) -> usize {
        self.turns.iter().filter(|t| t.tool_call_valid).count()
    }

    pub fn fully_masked(&self) -> bool {
        !self.loss_mask.iter().any(|&m| m)
    }

    pub fn state_actions(&self) -> impl Iterator<Item = (EnvState, ActionId)> + '_ {
        self.turns.iter().map(|t| (t.state, t.action))
    }
}
