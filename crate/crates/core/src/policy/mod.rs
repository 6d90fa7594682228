//! Tabular softmax policy: one logit row per enumerated state.

mod checkpoint;
mod rng;

use std::sync::Arc;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MAGIC};
pub use rng::{RngStream, Substream, SubstreamKind};

use crate::env::{ActionId, EnvState};
use crate::error::{Error, Result};

/// Live policy parameters. Logits are stored row-major, `[state][action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    logits: Vec<f64>,
    state_count: usize,
    action_count: usize,
    version: u64,
}

impl PolicyParams {
    /// Uniform policy (all logits 0).
    pub fn zeros(state_count: usize, action_count: usize) -> Self {
        Self {
            logits: vec![0.0; state_count * action_count],
            state_count,
            action_count,
            version: 0,
        }
    }

    pub fn from_logits(
        state_count: usize,
        action_count: usize,
        logits: Vec<f64>,
        version: u64,
    ) -> Result<Self> {
        if logits.len() != state_count * action_count {
            return Err(Error::DimensionMismatch {
                what: "logit table",
                expected: format!("{}", state_count * action_count),
                found: format!("{}", logits.len()),
            });
        }
        if let Some(i) = logits.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("logit {i} is not finite")));
        }
        Ok(Self {
            logits,
            state_count,
            action_count,
            version,
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn row(&self, state_index: usize) -> &[f64] {
        let start = state_index * self.action_count;
        &self.logits[start..start + self.action_count]
    }

    pub fn row_mut(&mut self, state_index: usize) -> &mut [f64] {
        let start = state_index * self.action_count;
        &mut self.logits[start..start + self.action_count]
    }

    /// `logits += step * direction`, then bumps the version counter.
    pub fn ascend(&mut self, direction: &[f64], step: f64) -> Result<()> {
        if direction.len() != self.logits.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient",
                expected: format!("{}", self.logits.len()),
                found: format!("{}", direction.len()),
            });
        }
        for (w, g) in self.logits.iter_mut().zip(direction) {
            *w += step * g;
        }
        if self.logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("update produced a non-finite logit".into()));
        }
        self.version += 1;
        Ok(())
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot(Arc::new(self.clone()))
    }

    fn check_state(&self, state_index: usize) -> Result<()> {
        if state_index >= self.state_count {
            return Err(Error::contract(format!(
                "state index {state_index} outside policy table ({} states)",
                self.state_count
            )));
        }
        Ok(())
    }

    pub fn action_distribution(&self, state: EnvState) -> Result<Vec<f64>> {
        self.check_state(state.state_index)?;
        softmax(self.row(state.state_index))
    }

    pub fn log_prob(&self, state: EnvState, action: ActionId) -> Result<f64> {
        self.check_state(state.state_index)?;
        self.check_action(action)?;
        log_softmax_at(self.row(state.state_index), action.0)
    }

    /// Gradient of `log_prob` with respect to the state's logit row:
    /// `indicator(b == action) - prob(b)`. Other rows are zero.
    pub fn grad_log_prob(&self, state: EnvState, action: ActionId) -> Result<Vec<f64>> {
        self.check_action(action)?;
        let mut g = self.action_distribution(state)?;
        for p in g.iter_mut() {
            *p = -*p;
        }
        g[action.0] += 1.0;
        Ok(g)
    }

    /// Inverse-CDF draw in fixed action order.
    pub fn sample_action(&self, state: EnvState, rng: &mut RngStream) -> Result<(ActionId, f64)> {
        let probs = self.action_distribution(state)?;
        let u = rng.next_f64();
        let mut cumulative = 0.0;
        let mut chosen = None;
        for (a, p) in probs.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                chosen = Some(a);
                break;
            }
        }
        // Rounding can leave the cumulative sum just below u; fall back to the
        // last action with non-zero mass.
        let a = chosen.unwrap_or_else(|| probs.iter().rposition(|&p| p > 0.0).unwrap_or(0));
        let lp = log_softmax_at(self.row(state.state_index), a)?;
        Ok((ActionId(a), lp))
    }

    /// Argmax with ties broken by the lowest action index.
    pub fn greedy_action(&self, state: EnvState) -> Result<ActionId> {
        self.check_state(state.state_index)?;
        let row = self.row(state.state_index);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        Ok(ActionId(best))
    }

    fn check_action(&self, action: ActionId) -> Result<()> {
        if action.0 >= self.action_count {
            return Err(Error::contract(format!(
                "action {} outside policy table ({} actions)",
                action.0, self.action_count
            )));
        }
        Ok(())
    }
}

/// Frozen copy of the parameters taken before a rollout phase.
#[derive(Debug, Clone)]
pub struct PolicySnapshot(Arc<PolicyParams>);

impl std::ops::Deref for PolicySnapshot {
    type Target = PolicyParams;

    fn deref(&self) -> &PolicyParams {
        &self.0
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    let max = finite_max(logits)?;
    let mut out: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = out.iter().sum();
    for p in out.iter_mut() {
        *p /= z;
    }
    Ok(out)
}

/// `log softmax(logits)[index]` via log-sum-exp.
pub fn log_softmax_at(logits: &[f64], index: usize) -> Result<f64> {
    let max = finite_max(logits)?;
    let z: f64 = logits.iter().map(|&x| (x - max).exp()).sum();
    Ok(logits[index] - max - z.ln())
}

fn finite_max(logits: &[f64]) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for &x in logits {
        if !x.is_finite() {
            return Err(Error::Numeric(format!("non-finite logit {x}")));
        }
        max = max.max(x);
    }
    Ok(max)
}

/// Sequence-mean of token-sums of `-log pi(a_t | s_t)` at the taken actions.
pub fn batch_entropy<I, T>(trajectories: I, params: &PolicyParams) -> Result<f64>
where
    I: IntoIterator<Item = T>,
    T: IntoIterator<Item = (EnvState, ActionId)>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for traj in trajectories {
        let mut sum = 0.0;
        for (s, a) in traj {
            sum -= params.log_prob(s, a)?;
        }
        total += sum;
        count += 1;
    }
    if count == 0 {
        return Err(Error::contract("entropy of an empty batch"));
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(i: usize) -> EnvState {
        EnvState {
            state_index: i,
            turn: 0,
        }
    }

    fn params(row: &[f64]) -> PolicyParams {
        PolicyParams::from_logits(1, row.len(), row.to_vec(), 0).unwrap()
    }

    #[test]
    fn uniform_distribution() {
        let p = PolicyParams::zeros(3, 4);
        for q in p.action_distribution(st(1)).unwrap() {
            assert_eq!(q, 0.25);
        }
        let lp = p.log_prob(st(2), ActionId(3)).unwrap();
        assert!((lp - (-1.3862943611198906)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_softmax() {
        let p = params(&[2f64.ln(), 0.0, 0.0, 0.0]);
        let d = p.action_distribution(st(0)).unwrap();
        let want = [0.4, 0.2, 0.2, 0.2];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_logit_does_not_overflow() {
        let p = params(&[1000.0, 0.0, 0.0, 0.0]);
        let d = p.action_distribution(st(0)).unwrap();
        assert!(d[0] >= 1.0 - 1e-9);
        assert!(d.iter().all(|x| x.is_finite()));
        assert!(p.log_prob(st(0), ActionId(0)).unwrap().abs() < 2e-9);
    }

    #[test]
    fn non_finite_logits_rejected() {
        assert!(PolicyParams::from_logits(1, 2, vec![f64::NAN, 0.0], 0).is_err());
        assert!(matches!(softmax(&[f64::INFINITY, 0.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn score_identity_examples() {
        let p = PolicyParams::zeros(1, 4);
        let g = p.grad_log_prob(st(0), ActionId(0)).unwrap();
        assert_eq!(g, vec![0.75, -0.25, -0.25, -0.25]);

        let p = params(&[60.0, 0.0, 0.0, 0.0]);
        let g = p.grad_log_prob(st(0), ActionId(0)).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn deterministic_policy_always_samples_its_action() {
        let p = params(&[0.0, 80.0, 0.0]);
        let mut rng = RngStream::new(5, Substream::new(SubstreamKind::Rollout, 0, 0, 0));
        for _ in 0..1000 {
            let (a, lp) = p.sample_action(st(0), &mut rng).unwrap();
            assert_eq!(a, ActionId(1));
            assert_eq!(lp, p.log_prob(st(0), a).unwrap());
        }
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let p = PolicyParams::zeros(1, 5);
        assert_eq!(p.greedy_action(st(0)).unwrap(), ActionId(0));
        let p = params(&[0.0, 2.0, 2.0]);
        assert_eq!(p.greedy_action(st(0)).unwrap(), ActionId(1));
    }

    #[test]
    fn entropy_is_sequence_mean_of_token_sums() {
        let p = PolicyParams::zeros(1, 4);
        let ln4 = 4f64.ln();
        let t = |n: usize| vec![(st(0), ActionId(0)); n];
        let h1 = batch_entropy([t(1)], &p).unwrap();
        assert!((h1 - ln4).abs() < 1e-12);
        let h3 = batch_entropy([t(3)], &p).unwrap();
        assert!((h3 - 3.0 * ln4).abs() < 1e-12);
        let h = batch_entropy([t(1), t(3)], &p).unwrap();
        assert!((h - 2.0 * ln4).abs() < 1e-12);
        assert!(batch_entropy(Vec::<Vec<(EnvState, ActionId)>>::new(), &p).is_err());
    }

    #[test]
    fn snapshot_is_unaffected_by_updates() {
        let mut p = PolicyParams::zeros(2, 3);
        let snap = p.snapshot();
        p.ascend(&[1.0; 6], 0.5).unwrap();
        assert_eq!(snap.logits(), &[0.0; 6]);
        assert_eq!(p.version(), 1);
        assert_eq!(snap.version(), 0);
    }
}
