use crate::env::Env;
use crate::error::{Error, Result};

/// Every tunable of a training run. Key names used by the config file are
/// listed in `harness::config`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env_name: String,
    pub seed_lo: u64,
    pub seed_hi: u64,
    pub max_turns: u32,
    /// Turn budget beyond which a trajectory is loss-masked.
    pub max_response_turns: u32,

    /// Tasks per step.
    pub train_batch_size: usize,
    /// Trajectories per task (G).
    pub group_size: usize,
    pub num_steps: u64,
    pub learning_rate: f64,
    /// Trajectories per gradient step.
    pub mini_batch_size: usize,
    pub seed: u64,

    pub eps_lb: f64,
    pub eps_ub: f64,
    /// Dual-clip floor.
    pub clip_c: f64,
    /// KL loss weight.
    pub beta: f64,
    /// Covariance clip ratio.
    pub lambda: f64,
    pub omega_lb: f64,
    pub omega_ub: f64,
    pub rollout_filter_ratio: f64,
    pub norm_adv_by_std: bool,

    /// Replay capacity (N_D).
    pub replay_capacity: usize,
    /// Baseline buffer capacity (N_D_R).
    pub baseline_capacity: usize,
    pub baseline_percentile: u32,
    pub t_warmup: u64,
    pub t_decay: u64,

    pub eval_seed_lo: u64,
    pub eval_num_seeds: u64,
    pub calibrate_top_lb_percent: f64,
    pub calibrate_top_ub_percent: f64,
}

impl TrainConfig {
    /// Defaults for `env_name`, with its standard turn budget.
    pub fn for_env(env_name: &str) -> Result<Self> {
        let max_turns = Env::default_max_turns(env_name)?;
        Ok(Self {
            env_name: env_name.to_owned(),
            seed_lo: 0,
            seed_hi: 9999,
            max_turns,
            max_response_turns: max_turns,
            train_batch_size: 16,
            group_size: 8,
            num_steps: 500,
            learning_rate: 16.0,
            mini_batch_size: 8,
            seed: 0,
            eps_lb: 0.2,
            eps_ub: 0.28,
            clip_c: 10.0,
            beta: 0.0,
            lambda: 0.02,
            omega_lb: 1.0,
            omega_ub: 40.0,
            rollout_filter_ratio: 0.75,
            norm_adv_by_std: false,
            replay_capacity: 16,
            baseline_capacity: 320,
            baseline_percentile: 50,
            t_warmup: 100,
            t_decay: 200,
            eval_seed_lo: 0,
            eval_num_seeds: 100,
            calibrate_top_lb_percent: 20.0,
            calibrate_top_ub_percent: 0.02,
        })
    }

    /// Checks every cross-field invariant; errors name the offending key.
    /// Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        Env::default_max_turns(&self.env_name)?;
        let bad = |key: &str, msg: String| Err(Error::config(key, msg));
        if self.seed_lo > self.seed_hi {
            return bad("env.seed_lo", format!("{} > env.seed_hi {}", self.seed_lo, self.seed_hi));
        }
        if self.max_turns == 0 {
            return bad("env.max_turns", "must be >= 1".into());
        }
        if self.max_response_turns == 0 {
            return bad("max_response_turns", "must be >= 1".into());
        }
        if self.train_batch_size == 0 {
            return bad("train_batch_size", "must be >= 1".into());
        }
        if self.group_size < 2 {
            return bad("n_samples_per_prompt", format!("must be >= 2, got {}", self.group_size));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("actor_learning_rate", format!("must be finite and > 0, got {}", self.learning_rate));
        }
        if self.mini_batch_size == 0 {
            return bad("ppo_mini_batch_size", "must be >= 1".into());
        }
        if !(self.eps_lb > 0.0 && self.eps_lb < 1.0) {
            return bad("eps_lb", format!("must be in (0, 1), got {}", self.eps_lb));
        }
        if !(self.eps_ub >= self.eps_lb) {
            return bad("eps_ub", format!("must be >= eps_lb {}, got {}", self.eps_lb, self.eps_ub));
        }
        if !(self.clip_c > 1.0 + self.eps_ub) {
            return bad("C", format!("must be > 1 + eps_ub = {}, got {}", 1.0 + self.eps_ub, self.clip_c));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta", format!("must be finite and >= 0, got {}", self.beta));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", format!("must be in [0, 1], got {}", self.lambda));
        }
        if !(self.omega_lb <= self.omega_ub) {
            return bad("omega_lb", format!("must be <= omega_ub {}, got {}", self.omega_ub, self.omega_lb));
        }
        if !(self.rollout_filter_ratio > 0.0 && self.rollout_filter_ratio <= 1.0) {
            return bad("rollout_filter_ratio", format!("must be in (0, 1], got {}", self.rollout_filter_ratio));
        }
        if self.replay_capacity == 0 {
            return bad("N_D", "must be >= 1".into());
        }
        if self.baseline_capacity == 0 {
            return bad("N_D_R", "must be >= 1".into());
        }
        if !(1..=100).contains(&self.baseline_percentile) {
            return bad("baseline_percentile", format!("must be in 1..=100, got {}", self.baseline_percentile));
        }
        if self.t_warmup == 0 {
            return bad("T_warmup", "must be >= 1".into());
        }
        if self.t_decay == 0 {
            return bad("T_decay", "must be >= 1".into());
        }
        for (key, v) in [
            ("calibrate.top_lb_percent", self.calibrate_top_lb_percent),
            ("calibrate.top_ub_percent", self.calibrate_top_ub_percent),
        ] {
            if !(v > 0.0 && v <= 100.0) {
                return bad(key, format!("must be in (0, 100], got {v}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for name in Env::NAMES {
            TrainConfig::for_env(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn clip_bounds_checked() {
        let mut c = TrainConfig::for_env("calc_chain").unwrap();
        c.eps_ub = 0.1;
        let err = c.validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "eps_ub"));

        let mut c = TrainConfig::for_env("calc_chain").unwrap();
        c.clip_c = 1.2;
        assert!(matches!(c.validate().unwrap_err(), Error::Config { ref key, .. } if key == "C"));
    }
}
