//! Sample filters applied before the policy update.

use crate::trajectory::Trajectory;

/// A trajectory is excluded from the loss when any turn lacks a valid tool
/// call (a void turn) or when it runs longer than `max_response_turns`.
pub fn void_or_overlong(traj: &Trajectory, max_response_turns: usize) -> bool {
    traj.turns.len() > max_response_turns || traj.turns.iter().any(|t| !t.tool_call_valid)
}

/// Fully loss-masks every void-turn or over-long trajectory. Returns how
/// many were masked. Rewards are left alone so the trajectories still count
/// toward group statistics.
pub fn filter_void_and_overlong(trajectories: &mut [Trajectory], max_response_turns: usize) -> usize {
    let mut masked = 0;
    for traj in trajectories.iter_mut() {
        if void_or_overlong(traj, max_response_turns) {
            traj.loss_mask.iter_mut().for_each(|m| *m = false);
            masked += 1;
        }
    }
    masked
}

/// Indices of the groups kept by the intra-group variance filter.
///
/// Groups are ranked by reward std (descending, ties by lower task seed, then
/// by position) and the top `ceil(ratio * count)` survive. The returned
/// indices are in ascending batch order.
pub fn filter_low_variance_groups(stds_and_seeds: &[(f64, u64)], ratio: f64) -> Vec<usize> {
    let count = stds_and_seeds.len();
    let keep = ((ratio * count as f64).ceil() as usize).min(count);
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| {
        let (sa, ka) = stds_and_seeds[a];
        let (sb, kb) = stds_and_seeds[b];
        sb.total_cmp(&sa).then(ka.cmp(&kb)).then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    kept
}
