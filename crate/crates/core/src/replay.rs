//! Self-imitation replay buffer.
//!
//! Trajectories enter only with a positive group advantage. When the
//! buffer is full the trainer refilters it against the current baseline,
//! replays the survivors, and drains it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::advantage::BaselineBuffer;
use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, Turn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTrajectory {
    pub turns: Vec<Turn>,
    pub reward_total: f64,
    /// Group advantage at admission time, always > 0.
    pub adv_at_store: f64,
    pub collected_at_step: u64,
    pub loss_mask: Vec<bool>,
}

/// A stored trajectory that passed the recalibrated gate.
#[derive(Debug, Clone, Copy)]
pub struct Retained<'a> {
    pub entry: &'a StoredTrajectory,
    pub recalibrated_advantage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    entries: Vec<StoredTrajectory>,
    capacity: usize,
    admissions_since_drain: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay capacity must be >= 1");
        Self {
            entries: Vec::new(),
            capacity,
            admissions_since_drain: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[StoredTrajectory] {
        &self.entries
    }

    pub fn admissions_since_drain(&self) -> usize {
        self.admissions_since_drain
    }

    /// Stores `traj` iff `advantage > 0`. Storing into a full buffer is a
    /// contract violation.
    pub fn maybe_store(&mut self, traj: &Trajectory, advantage: f64, step: u64) -> Result<bool> {
        if self.is_full() {
            return Err(Error::contract("store into a full replay buffer"));
        }
        if advantage.is_nan() || advantage <= 0.0 {
            return Ok(false);
        }
        if let Some(t) = traj
            .turns
            .iter()
            .find(|t| !t.behavior_log_prob.is_finite() || t.behavior_log_prob > 0.0)
        {
            return Err(Error::contract(format!(
                "behavior log-prob {} is not a finite log-probability",
                t.behavior_log_prob
            )));
        }
        self.entries.push(StoredTrajectory {
            turns: traj.turns.clone(),
            reward_total: traj.reward.total,
            adv_at_store: advantage,
            collected_at_step: step,
            loss_mask: traj.loss_mask.clone(),
        });
        self.admissions_since_drain += 1;
        Ok(true)
    }

    /// Entries whose recalibrated advantage `R - P50` is positive, each with
    /// that advantage attached. The buffer itself is left untouched.
    pub fn refilter(&self, baseline: &BaselineBuffer) -> Result<Vec<Retained<'_>>> {
        let b = baseline.baseline()?;
        Ok(self
            .entries
            .iter()
            .filter_map(|entry| {
                let adv = entry.reward_total - b;
                (adv > 0.0).then_some(Retained {
                    entry,
                    recalibrated_advantage: adv,
                })
            })
            .collect())
    }

    pub fn drain(&mut self) {
        self.entries.clear();
        self.admissions_since_drain = 0;
    }

    /// Line-delimited JSON dump of the current entries.
    pub fn dump_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
