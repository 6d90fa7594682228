//! Clipped policy-gradient surrogate, its analytic gradient with respect to
//! the logit table, and the mini-batched ascent loop.

use crate::error::{Error, Result};
use crate::policy::{log_softmax_at, softmax, PolicyParams};
use crate::trajectory::Turn;

/// Ratios above this are reported as overflow and capped.
pub const RATIO_SENTINEL: f64 = 1e300;

/// `exp(current - behavior)`. The flag is set when the ratio had to be capped.
pub fn importance_ratio(current_log_prob: f64, behavior_log_prob: f64) -> (f64, bool) {
    let r = (current_log_prob - behavior_log_prob).exp();
    if r.is_finite() && r <= RATIO_SENTINEL {
        (r, false)
    } else {
        (RATIO_SENTINEL, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipSettings {
    pub eps_lb: f64,
    pub eps_ub: f64,
    /// Dual-clip floor `C`; `f64::INFINITY` disables it.
    pub dual_clip: f64,
}

/// `min(r A, clip(r, 1 - eps_lb, 1 + eps_ub) A)`, floored at `C A` when `A < 0`.
pub fn clipped_surrogate(r: f64, advantage: f64, eps_lb: f64, eps_ub: f64, c: f64) -> f64 {
    surrogate_and_slope(
        r,
        advantage,
        &ClipSettings {
            eps_lb,
            eps_ub,
            dual_clip: c,
        },
    )
    .0
}

/// Surrogate value and its derivative with respect to `r`.
pub fn surrogate_and_slope(r: f64, a: f64, clip: &ClipSettings) -> (f64, f64) {
    let clipped_r = r.clamp(1.0 - clip.eps_lb, 1.0 + clip.eps_ub);
    let unclipped = r * a;
    let clipped = clipped_r * a;
    let (base, slope) = if unclipped <= clipped {
        (unclipped, a)
    } else {
        (clipped, 0.0)
    };
    if a < 0.0 {
        let floor = clip.dual_clip * a;
        if floor > base {
            return (floor, 0.0);
        }
    }
    (base, slope)
}

/// One sequence in an objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub turns: &'a [Turn],
    pub loss_mask: &'a [bool],
    pub advantage: f64,
    /// Covariance clip mask `M`; `false` removes the token from the loss.
    pub clip_mask: Option<&'a [bool]>,
}

impl Sample<'_> {
    pub fn learnable(&self, t: usize) -> bool {
        self.loss_mask[t] && self.clip_mask.is_none_or(|m| m[t])
    }

    pub fn learnable_count(&self) -> usize {
        (0..self.turns.len()).filter(|&t| self.learnable(t)).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ObjectiveSettings<'a> {
    pub clip: ClipSettings,
    /// Divide each sequence's token-sum by its length.
    pub length_normalize: bool,
    /// Optional KL penalty `beta * k3(ref, cur)` against a reference policy.
    pub kl_penalty: Option<(&'a PolicyParams, f64)>,
    /// Overall weight, e.g. the self-imitation `gamma`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub learnable_tokens: usize,
    pub ratio_overflows: u64,
}

/// Value and gradient of
/// `scale / n * sum_i w_i sum_t [learnable] (surrogate(r_t, A_i) - beta k3_t)`.
///
/// Tokens that are not learnable are skipped entirely, so they contribute an
/// exact zero to every gradient coordinate.
pub fn evaluate(
    params: &PolicyParams,
    samples: &[Sample<'_>],
    settings: &ObjectiveSettings<'_>,
) -> Result<ObjectiveEval> {
    let mut gradient = vec![0.0; params.logits().len()];
    let mut value = 0.0;
    let mut learnable_tokens = 0;
    let mut ratio_overflows = 0;
    if samples.is_empty() {
        return Ok(ObjectiveEval {
            value,
            gradient,
            learnable_tokens,
            ratio_overflows,
        });
    }
    let n = samples.len() as f64;
    let na = params.action_count();
    for sample in samples {
        if sample.loss_mask.len() != sample.turns.len() {
            return Err(Error::contract("loss mask length differs from turn count"));
        }
        let w = if settings.length_normalize && !sample.turns.is_empty() {
            1.0 / sample.turns.len() as f64
        } else {
            1.0
        };
        let weight = settings.scale * w / n;
        for (t, turn) in sample.turns.iter().enumerate() {
            if !sample.learnable(t) {
                continue;
            }
            learnable_tokens += 1;
            let s = turn.state.state_index;
            let a = turn.action.0;
            let row = params.row(s);
            let lp = log_softmax_at(row, a)?;
            let (r, overflow) = importance_ratio(lp, turn.behavior_log_prob);
            ratio_overflows += u64::from(overflow);
            let (v, slope) = surrogate_and_slope(r, sample.advantage, &settings.clip);
            // d surrogate / d logp = slope * r
            let mut coeff = slope * r;
            let mut token_value = v;
            if let Some((reference, beta)) = settings.kl_penalty {
                let x = log_softmax_at(reference.row(s), a)? - lp;
                token_value -= beta * (x.exp() - x - 1.0);
                coeff += beta * (x.exp() - 1.0);
            }
            value += weight * token_value;
            let c = weight * coeff;
            if c != 0.0 {
                let probs = softmax(row)?;
                let g = &mut gradient[s * na..(s + 1) * na];
                for (b, p) in probs.iter().enumerate() {
                    g[b] -= c * p;
                }
                g[a] += c;
            }
        }
    }
    Ok(ObjectiveEval {
        value,
        gradient,
        learnable_tokens,
        ratio_overflows,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    /// Mean objective value over the mini-batches, before each step.
    pub objective: f64,
    pub learnable_tokens: usize,
    pub steps_applied: u64,
    pub ratio_overflows: u64,
    /// Set when no mini-batch had a learnable token and nothing was applied.
    pub noop: bool,
}

/// Gradient ascent over consecutive mini-batches of `mini_batch_size`
/// samples, one fixed-size step per mini-batch.
pub fn ascend(
    params: &mut PolicyParams,
    samples: &[Sample<'_>],
    settings: &ObjectiveSettings<'_>,
    learning_rate: f64,
    mini_batch_size: usize,
) -> Result<UpdateStats> {
    if mini_batch_size == 0 {
        return Err(Error::contract("mini batch size must be >= 1"));
    }
    let mut stats = UpdateStats::default();
    let mut batches = 0usize;
    for chunk in samples.chunks(mini_batch_size) {
        let eval = evaluate(params, chunk, settings)?;
        stats.ratio_overflows += eval.ratio_overflows;
        if eval.learnable_tokens == 0 {
            continue;
        }
        stats.objective += eval.value;
        stats.learnable_tokens += eval.learnable_tokens;
        batches += 1;
        params.ascend(&eval.gradient, learning_rate)?;
        stats.steps_applied += 1;
    }
    if batches > 0 {
        stats.objective /= batches as f64;
    } else {
        stats.noop = true;
    }
    Ok(stats)
}

/// Mean over tokens of `exp(ref - cur) - (ref - cur) - 1` at the taken actions.
pub fn kl_metric<'a, I>(params: &PolicyParams, reference: &PolicyParams, turns: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Turn>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for turn in turns {
        let s = turn.state.state_index;
        let cur = log_softmax_at(params.row(s), turn.action.0)?;
        let reference = log_softmax_at(reference.row(s), turn.action.0)?;
        let x = reference - cur;
        sum += x.exp() - x - 1.0;
        n += 1;
    }
    if n == 0 {
        return Err(Error::contract("kl metric over an empty batch"));
    }
    Ok(sum / n as f64)
}
