//! Covariance-based token clipping for the self-imitation loss.

use super::objective::Sample;
use crate::error::Result;
use crate::policy::{log_softmax_at, PolicyParams, RngStream};

/// A loss-unmasked token of a batch and its covariance term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenCovariance {
    pub sample: usize,
    pub turn: usize,
    pub log_prob: f64,
    pub covariance: f64,
}

/// `(log pi(a|s) - mean log pi) * (A - mean A)` for every token with
/// `loss_mask` set, both means taken over those tokens batch-wide.
/// The sample's advantage is the token's advantage.
pub fn token_covariance(samples: &[Sample<'_>], params: &PolicyParams) -> Result<Vec<TokenCovariance>> {
    let mut tokens = Vec::new();
    let mut advs = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        for (t, turn) in sample.turns.iter().enumerate() {
            if !sample.loss_mask[t] {
                continue;
            }
            let lp = log_softmax_at(params.row(turn.state.state_index), turn.action.0)?;
            tokens.push(TokenCovariance {
                sample: i,
                turn: t,
                log_prob: lp,
                covariance: 0.0,
            });
            advs.push(sample.advantage);
        }
    }
    if tokens.is_empty() {
        return Ok(tokens);
    }
    let mean_lp = shifted_mean(tokens.iter().map(|t| t.log_prob));
    let mean_adv = shifted_mean(advs.iter().copied());
    for (tok, adv) in tokens.iter_mut().zip(&advs) {
        tok.covariance = (tok.log_prob - mean_lp) * (adv - mean_adv);
    }
    Ok(tokens)
}

/// Mean computed relative to the first value, so a constant sequence has
/// exactly that constant as its mean and zero centered terms.
fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return 0.0 };
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + (v - first), n + 1));
    first + sum / n as f64
}

/// Clip mask `M` over `covariances` (`true` keeps the token).
///
/// Eligible tokens have covariance in `[omega_lb, omega_ub]`. Exactly
/// `min(round(lambda * N), eligible)` of them, drawn uniformly without
/// replacement, are masked out.
pub fn select_clip_mask(
    covariances: &[f64],
    omega_lb: f64,
    omega_ub: f64,
    lambda: f64,
    rng: &mut RngStream,
) -> Vec<bool> {
    let mut mask = vec![true; covariances.len()];
    let mut eligible: Vec<usize> = covariances
        .iter()
        .enumerate()
        .filter(|(_, &c)| omega_lb <= c && c <= omega_ub)
        .map(|(i, _)| i)
        .collect();
    let budget = clip_budget(covariances.len(), lambda).min(eligible.len());
    // partial Fisher-Yates
    for k in 0..budget {
        let j = k + rng.below(eligible.len() - k);
        eligible.swap(k, j);
        mask[eligible[k]] = false;
    }
    mask
}

/// `round(lambda * n)`, halves rounded away from zero.
pub fn clip_budget(n: usize, lambda: f64) -> usize {
    (lambda * n as f64).round() as usize
}
