//! Group-relative advantages and the FIFO baseline buffer used to
//! recalibrate advantages of replayed trajectories.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `R_i - mean(R)`, divided by the population std when `normalize_by_std`.
pub fn group_advantage(rewards: &[f64], normalize_by_std: bool) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::contract(format!(
            "group advantage needs at least 2 rewards, got {}",
            rewards.len()
        )));
    }
    let (mean, std) = mean_std(rewards);
    let centered = rewards.iter().map(|r| r - mean);
    if normalize_by_std {
        if std == 0.0 {
            return Err(Error::DegenerateGroup);
        }
        Ok(centered.map(|a| a / std).collect())
    } else {
        Ok(centered.collect())
    }
}

/// FIFO of intra-group mean rewards with a fixed capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineBuffer {
    entries: VecDeque<f64>,
    capacity: usize,
    percentile: u32,
}

impl BaselineBuffer {
    pub fn new(capacity: usize) -> Self {
        Self::with_percentile(capacity, 50)
    }

    /// `percentile` in `1..=100`; the baseline is the nearest-rank order statistic.
    pub fn with_percentile(capacity: usize, percentile: u32) -> Self {
        assert!(capacity >= 1, "baseline buffer capacity must be >= 1");
        assert!((1..=100).contains(&percentile), "percentile must be in 1..=100");
        Self {
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            percentile,
        }
    }

    pub fn push(&mut self, group_mean: f64) {
        self.entries.push_back(group_mean);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
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

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().copied()
    }

    /// The configured percentile of the entries (P50 by default).
    pub fn baseline(&self) -> Result<f64> {
        let values: Vec<f64> = self.entries.iter().copied().collect();
        nearest_rank(values, self.percentile)
    }

    /// `R - baseline()`, with no std division.
    pub fn recalibrate(&self, reward: f64) -> Result<f64> {
        Ok(reward - self.baseline()?)
    }
}

/// Append and evict oldest entries beyond capacity.
pub fn push_baseline(buffer: &mut BaselineBuffer, group_mean: f64) {
    buffer.push(group_mean);
}

/// Lower median by nearest rank: element `ceil(n/2) - 1` of the sorted entries.
pub fn p50(values: &[f64]) -> Result<f64> {
    nearest_rank(values.to_vec(), 50)
}

pub fn recalibrate(reward: f64, buffer: &BaselineBuffer) -> Result<f64> {
    buffer.recalibrate(reward)
}

fn nearest_rank(mut values: Vec<f64>, percentile: u32) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::contract("percentile of an empty baseline buffer"));
    }
    let n = values.len();
    let rank = (percentile as usize * n).div_ceil(100).max(1);
    let (_, v, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*v)
}
