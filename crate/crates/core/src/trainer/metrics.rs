use serde::{Deserialize, Serialize};

/// Which side of the replay branch a step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Variant without replay: on-policy update only.
    OnPolicy,
    /// Replay had room: admit positive-advantage trajectories, on-policy update.
    Fill,
    /// Replay was full: refilter, on-policy update, self-imitation update, drain.
    Sil,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ratio_overflows: u64,
    pub noop_updates: u64,
    pub degenerate_groups: u64,
}

/// One line of the metrics stream.
///
/// `wall_ms` is not serialized so that metric files depend only on the
/// config and seed; timings go to a separate stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub branch: Branch,
    pub success_rate: f64,
    pub mean_total_reward: f64,
    pub entropy: f64,
    pub mean_n_tool_call: f64,
    pub replay_fill: usize,
    pub clipped_token_fraction: f64,
    pub gamma_t: f64,
    pub mu_t: f64,
    pub kl_metric: f64,
    pub on_policy_objective: f64,
    pub sil_objective: Option<f64>,
    pub sil_retained: usize,
    pub groups_kept: usize,
    pub masked_trajectories: usize,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub wall_ms: f64,
}
