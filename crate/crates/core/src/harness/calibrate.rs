use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::trainer::{filter_void_and_overlong, token_covariance, GroupBatch, RolloutGroup, TrainConfig, Trainer, Variant};

/// Covariance bounds measured on one rollout batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaCalibration {
    pub omega_lb: f64,
    pub omega_ub: f64,
    /// Tokens the statistics were taken over.
    pub tokens: usize,
}

impl OmegaCalibration {
    /// Config fragment holding only the two bounds.
    pub fn to_config_text(&self) -> String {
        format!("omega_lb = {}\nomega_ub = {}\n", self.omega_lb, self.omega_ub)
    }
}

/// Rounded means of the top `lb_percent`% and top `ub_percent`% of
/// `covariances`. A window always holds at least one value.
pub fn omega_from_covariances(covariances: &[f64], lb_percent: f64, ub_percent: f64) -> Result<OmegaCalibration> {
    if covariances.is_empty() {
        return Err(Error::CalibrationDeclined("no learnable tokens in the batch".into()));
    }
    if covariances.iter().all(|&c| c == 0.0) {
        return Err(Error::CalibrationDeclined(
            "every token covariance is 0; the batch carries no signal (uniform policy or constant advantages)".into(),
        ));
    }
    if covariances.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite token covariance".into()));
    }
    let mut sorted = covariances.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top_mean = |pct: f64| {
        let k = ((pct * sorted.len() as f64 / 100.0).ceil() as usize).clamp(1, sorted.len());
        (sorted[..k].iter().sum::<f64>() / k as f64).round()
    };
    let (omega_lb, omega_ub) = (top_mean(lb_percent), top_mean(ub_percent));
    Ok(OmegaCalibration {
        omega_lb: omega_lb.min(omega_ub),
        omega_ub: omega_ub.max(omega_lb),
        tokens: covariances.len(),
    })
}

/// Collects one rollout batch from `policy` (the all-zero initial policy when
/// `None`), scores it as the self-imitation variant would at step 0 and
/// measures the covariance windows of `config`.
pub fn calibrate_omega(config: &TrainConfig, policy: Option<PolicyParams>) -> Result<OmegaCalibration> {
    let mut trainer = Trainer::new(config.clone(), Variant::Spear)?;
    if let Some(p) = policy {
        let cur = trainer.params();
        if (p.state_count(), p.action_count()) != (cur.state_count(), cur.action_count()) {
            return Err(Error::DimensionMismatch {
                what: "policy table",
                expected: format!("{}x{}", cur.state_count(), cur.action_count()),
                found: format!("{}x{}", p.state_count(), p.action_count()),
            });
        }
        *trainer.params_mut() = p;
    }
    let snapshot = trainer.params().snapshot();
    let rollouts: Vec<RolloutGroup> = trainer.collect_rollouts(&snapshot)?;
    let mut groups = Vec::with_capacity(rollouts.len());
    for rg in rollouts {
        let mut trajs = rg
            .episodes
            .into_iter()
            .map(|e| trainer.score(rg.task_seed, e))
            .collect::<Result<Vec<_>>>()?;
        filter_void_and_overlong(&mut trajs, config.max_response_turns as usize);
        groups.push(GroupBatch::new(rg.task_seed, trajs, trainer.features().normalize_by_std)?.0);
    }
    let samples = crate::trainer::on_policy_samples(&groups);
    let covs: Vec<f64> = token_covariance(&samples, trainer.params())?
        .into_iter()
        .map(|c| c.covariance)
        .collect();
    omega_from_covariances(&covs, config.calibrate_top_lb_percent, config.calibrate_top_ub_percent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_one_to_hundred() {
        let covs: Vec<f64> = (1..=100).map(f64::from).collect();
        let c = omega_from_covariances(&covs, 20.0, 2.0).unwrap();
        assert_eq!((c.omega_lb, c.omega_ub), (91.0, 100.0));
        assert_eq!(c.to_config_text(), "omega_lb = 91\nomega_ub = 100\n");
    }

    #[test]
    fn all_zero_declines() {
        let err = omega_from_covariances(&[0.0; 10], 20.0, 0.02).unwrap_err();
        assert!(matches!(err, Error::CalibrationDeclined(_)));
        assert!(omega_from_covariances(&[], 20.0, 0.02).is_err());
    }

    #[test]
    fn tiny_window_keeps_the_max() {
        let c = omega_from_covariances(&[3.0, -1.0, 7.4], 20.0, 0.02).unwrap();
        assert_eq!((c.omega_lb, c.omega_ub), (7.0, 7.0));
    }

    #[test]
    fn uniform_initial_policy_declines() {
        let cfg = TrainConfig::for_env("calc_chain").unwrap();
        let err = calibrate_omega(&cfg, None).unwrap_err();
        assert!(matches!(err, Error::CalibrationDeclined(_)), "{err}");
    }
}
