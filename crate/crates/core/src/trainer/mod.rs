//! The training loop.
//!
//! Each step snapshots the policy, rolls out `G` trajectories for each task
//! of the batch, scores them with the scheduled composite reward, and
//! computes group-relative advantages. Group means feed the baseline
//! buffer. While the replay buffer has room, positive-advantage
//! trajectories are admitted and only the on-policy objective is applied.
//! Once it is full, the buffer is refiltered against the P50 baseline, the
//! on-policy update runs, then the covariance-clipped self-imitation update
//! weighted by `gamma(t)`, and the buffer is drained.

mod config;
mod covariance;
mod filters;
mod metrics;
mod objective;
mod rollout;

use std::time::Instant;

use rayon::prelude::*;

pub use config::TrainConfig;
pub use covariance::{clip_budget, select_clip_mask, token_covariance, TokenCovariance};
pub use filters::{filter_low_variance_groups, filter_void_and_overlong, void_or_overlong};
pub use metrics::{Branch, Diagnostics, MetricsRecord};
pub use objective::{
    ascend, clipped_surrogate, evaluate, importance_ratio, kl_metric, surrogate_and_slope,
    ClipSettings, ObjectiveEval, ObjectiveSettings, Sample, UpdateStats, RATIO_SENTINEL,
};
pub use rollout::{evaluate_greedy, run_episode, Episode, EvalSummary};

use crate::advantage::{group_advantage, mean_std, BaselineBuffer};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::policy::{batch_entropy, PolicyParams, PolicySnapshot, RngStream, Substream, SubstreamKind};
use crate::replay::{ReplayBuffer, Retained};
use crate::reward::{compose, format_reward, gamma, mu, outcome_reward, tool_call_reward};
use crate::trajectory::{Trajectory, Turn};

/// Which objective a run trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    /// Plain clipped group-relative objective: std-normalized advantages,
    /// symmetric clip, per-sequence length normalization, no filters.
    Grpo,
    /// All the sample-level tricks: clip-higher, dual-clip, no std or length
    /// normalization, void-turn/over-long masking, low-variance group filter.
    Drbot,
    /// `Drbot` plus self-imitation replay and both curricula.
    Spear,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Grpo, Variant::Drbot, Variant::Spear];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Grpo => "grpo",
            Variant::Drbot => "drbot",
            Variant::Spear => "spear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config("variant", format!("unknown variant {s:?} (grpo | drbot | spear)")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Trainer features selected by a [`Variant`] from a [`TrainConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    pub normalize_by_std: bool,
    pub clip: ClipSettings,
    pub length_normalize: bool,
    pub void_overlong_filter: bool,
    pub group_filter_ratio: Option<f64>,
    pub self_imitation: bool,
    /// Tool-call reward scheduled by `mu(t)`; without it the term is absent.
    pub tool_call_curriculum: bool,
}

impl Features {
    pub fn new(variant: Variant, config: &TrainConfig) -> Self {
        match variant {
            Variant::Grpo => Self {
                normalize_by_std: true,
                clip: ClipSettings {
                    eps_lb: config.eps_lb,
                    eps_ub: config.eps_lb,
                    dual_clip: f64::INFINITY,
                },
                length_normalize: true,
                void_overlong_filter: false,
                group_filter_ratio: None,
                self_imitation: false,
                tool_call_curriculum: false,
            },
            Variant::Drbot | Variant::Spear => Self {
                normalize_by_std: config.norm_adv_by_std,
                clip: ClipSettings {
                    eps_lb: config.eps_lb,
                    eps_ub: config.eps_ub,
                    dual_clip: config.clip_c,
                },
                length_normalize: false,
                void_overlong_filter: true,
                group_filter_ratio: Some(config.rollout_filter_ratio),
                self_imitation: variant == Variant::Spear,
                tool_call_curriculum: variant == Variant::Spear,
            },
        }
    }
}

/// `G` trajectories sharing one task seed, with their group advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBatch {
    pub task_seed: u64,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub reward_std: f64,
}

impl GroupBatch {
    /// Scores `trajectories` relative to each other. A zero-spread group
    /// under std normalization gets all-zero advantages and `degenerate`
    /// is returned as `true`.
    pub fn new(task_seed: u64, trajectories: Vec<Trajectory>, normalize_by_std: bool) -> Result<(Self, bool)> {
        let rewards: Vec<f64> = trajectories.iter().map(|t| t.reward.total).collect();
        let (_, reward_std) = mean_std(&rewards);
        let (advantages, degenerate) = match group_advantage(&rewards, normalize_by_std) {
            Ok(a) => (a, false),
            Err(Error::DegenerateGroup) => (vec![0.0; rewards.len()], true),
            Err(e) => return Err(e),
        };
        Ok((
            Self {
                task_seed,
                trajectories,
                rewards,
                advantages,
                reward_std,
            },
            degenerate,
        ))
    }

    pub fn mean_reward(&self) -> f64 {
        mean_std(&self.rewards).0
    }
}

/// Rollouts of one task before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub task_seed: u64,
    pub episodes: Vec<Episode>,
}

/// Step size, batching and objective shape shared by both updates.
#[derive(Debug, Clone, Copy)]
pub struct UpdateOptions<'a> {
    pub clip: ClipSettings,
    pub length_normalize: bool,
    pub kl_penalty: Option<(&'a PolicyParams, f64)>,
    pub learning_rate: f64,
    pub mini_batch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceClip {
    pub omega_lb: f64,
    pub omega_ub: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SilStats {
    pub update: UpdateStats,
    pub learnable_tokens: usize,
    pub clipped_tokens: usize,
}

impl SilStats {
    pub fn clipped_fraction(&self) -> f64 {
        if self.learnable_tokens == 0 {
            0.0
        } else {
            self.clipped_tokens as f64 / self.learnable_tokens as f64
        }
    }
}

/// On-policy samples of `groups`, in batch order.
pub fn on_policy_samples(groups: &[GroupBatch]) -> Vec<Sample<'_>> {
    groups
        .iter()
        .flat_map(|g| {
            g.trajectories.iter().zip(&g.advantages).map(|(t, &a)| Sample {
                turns: &t.turns,
                loss_mask: &t.loss_mask,
                advantage: a,
                clip_mask: None,
            })
        })
        .collect()
}

/// Gradient ascent on the sequence-mean of token-summed clipped surrogates.
pub fn on_policy_update(
    params: &mut PolicyParams,
    groups: &[GroupBatch],
    opts: &UpdateOptions<'_>,
) -> Result<UpdateStats> {
    let samples = on_policy_samples(groups);
    let settings = ObjectiveSettings {
        clip: opts.clip,
        length_normalize: opts.length_normalize,
        kl_penalty: opts.kl_penalty,
        scale: 1.0,
    };
    ascend(params, &samples, &settings, opts.learning_rate, opts.mini_batch_size)
}

/// Self-imitation samples of `retained` with recalibrated advantages.
pub fn sil_samples<'a>(retained: &[Retained<'a>]) -> Vec<Sample<'a>> {
    retained
        .iter()
        .map(|r| Sample {
            turns: &r.entry.turns,
            loss_mask: &r.entry.loss_mask,
            advantage: r.recalibrated_advantage,
            clip_mask: None,
        })
        .collect()
}

/// Per-sample covariance clip masks for `samples` at `params`, plus the
/// number of masked tokens.
pub fn covariance_masks(
    samples: &[Sample<'_>],
    params: &PolicyParams,
    clip: &CovarianceClip,
    rng: &mut RngStream,
) -> Result<(Vec<Vec<bool>>, usize)> {
    let covs = token_covariance(samples, params)?;
    let values: Vec<f64> = covs.iter().map(|c| c.covariance).collect();
    let keep = select_clip_mask(&values, clip.omega_lb, clip.omega_ub, clip.lambda, rng);
    let mut masks: Vec<Vec<bool>> = samples.iter().map(|s| vec![true; s.turns.len()]).collect();
    let mut clipped = 0;
    for (tok, k) in covs.iter().zip(keep) {
        if !k {
            masks[tok.sample][tok.turn] = false;
            clipped += 1;
        }
    }
    Ok((masks, clipped))
}

/// Gradient ascent on `gamma` times the covariance-clipped self-imitation
/// objective, with ratios against the stored behaviour log-probs.
pub fn sil_update(
    params: &mut PolicyParams,
    retained: &[Retained<'_>],
    opts: &UpdateOptions<'_>,
    clip: Option<&CovarianceClip>,
    gamma_t: f64,
    rng: &mut RngStream,
) -> Result<SilStats> {
    if !(0.0..=1.0).contains(&gamma_t) {
        return Err(Error::contract(format!("gamma must be in [0, 1], got {gamma_t}")));
    }
    let mut samples = sil_samples(retained);
    let learnable_tokens: usize = samples.iter().map(|s| s.learnable_count()).sum();
    if samples.is_empty() || learnable_tokens == 0 || gamma_t == 0.0 {
        return Ok(SilStats {
            update: UpdateStats {
                noop: true,
                ..Default::default()
            },
            learnable_tokens,
            clipped_tokens: 0,
        });
    }
    let (masks, clipped_tokens) = match clip {
        Some(c) => covariance_masks(&samples, params, c, rng)?,
        None => (Vec::new(), 0),
    };
    if clip.is_some() {
        for (s, m) in samples.iter_mut().zip(&masks) {
            s.clip_mask = Some(m);
        }
    }
    let settings = ObjectiveSettings {
        clip: opts.clip,
        length_normalize: opts.length_normalize,
        kl_penalty: opts.kl_penalty,
        scale: gamma_t,
    };
    let update = ascend(params, &samples, &settings, opts.learning_rate, opts.mini_batch_size)?;
    Ok(SilStats {
        update,
        learnable_tokens,
        clipped_tokens,
    })
}

/// Value and gradient of `J_on + gamma * J_sil` in one pass at fixed params.
pub fn total_objective(
    params: &PolicyParams,
    on_policy: &[Sample<'_>],
    sil: &[Sample<'_>],
    opts: &UpdateOptions<'_>,
    gamma_t: f64,
) -> Result<ObjectiveEval> {
    let on = evaluate(
        params,
        on_policy,
        &ObjectiveSettings {
            clip: opts.clip,
            length_normalize: opts.length_normalize,
            kl_penalty: opts.kl_penalty,
            scale: 1.0,
        },
    )?;
    let off = evaluate(
        params,
        sil,
        &ObjectiveSettings {
            clip: opts.clip,
            length_normalize: opts.length_normalize,
            kl_penalty: opts.kl_penalty,
            scale: gamma_t,
        },
    )?;
    let gradient = on.gradient.iter().zip(&off.gradient).map(|(a, b)| a + b).collect();
    Ok(ObjectiveEval {
        value: on.value + off.value,
        gradient,
        learnable_tokens: on.learnable_tokens + off.learnable_tokens,
        ratio_overflows: on.ratio_overflows + off.ratio_overflows,
    })
}

/// Training state for one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    variant: Variant,
    features: Features,
    env: Env,
    params: PolicyParams,
    reference: PolicyParams,
    baseline: BaselineBuffer,
    replay: ReplayBuffer,
    t_iter: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig, variant: Variant) -> Result<Self> {
        config.validate()?;
        let env = Env::build(&config.env_name, config.max_turns)?;
        let params = PolicyParams::zeros(env.state_count(), env.action_count());
        Ok(Self {
            features: Features::new(variant, &config),
            reference: params.clone(),
            params,
            baseline: BaselineBuffer::with_percentile(config.baseline_capacity, config.baseline_percentile),
            replay: ReplayBuffer::new(config.replay_capacity),
            env,
            config,
            variant,
            t_iter: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut PolicyParams {
        &mut self.params
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn baseline(&self) -> &BaselineBuffer {
        &self.baseline
    }

    /// Steps completed so far (the next step's `t_iter`).
    pub fn t_iter(&self) -> u64 {
        self.t_iter
    }

    pub fn mu_t(&self) -> f64 {
        if self.features.tool_call_curriculum {
            mu(self.t_iter, self.config.t_decay)
        } else {
            0.0
        }
    }

    pub fn gamma_t(&self) -> f64 {
        if self.features.self_imitation {
            gamma(self.t_iter, self.config.t_warmup)
        } else {
            0.0
        }
    }

    /// Task seeds for the current step.
    pub fn task_seeds(&self) -> Vec<u64> {
        let mut rng = RngStream::new(
            self.config.seed,
            Substream::new(SubstreamKind::TaskSeeds, self.t_iter, 0, 0),
        );
        (0..self.config.train_batch_size)
            .map(|_| rng.range_inclusive(self.config.seed_lo, self.config.seed_hi))
            .collect()
    }

    /// Rolls out `G` episodes per task seed against `snapshot`.
    pub fn collect_rollouts(&self, snapshot: &PolicySnapshot) -> Result<Vec<RolloutGroup>> {
        let seeds = self.task_seeds();
        let g = self.config.group_size;
        let episodes: Vec<Episode> = (0..seeds.len() * g)
            .into_par_iter()
            .map(|k| {
                let (group, index) = (k / g, k % g);
                let mut rng = RngStream::new(
                    self.config.seed,
                    Substream::new(SubstreamKind::Rollout, self.t_iter, group as u64, index as u64),
                );
                run_episode(&self.env, snapshot, seeds[group], &mut rng)
            })
            .collect::<Result<_>>()?;
        let mut episodes = episodes.into_iter();
        Ok(seeds
            .into_iter()
            .map(|task_seed| RolloutGroup {
                task_seed,
                episodes: episodes.by_ref().take(g).collect(),
            })
            .collect())
    }

    /// Scores an episode with the reward schedule of the current step.
    pub fn score(&self, task_seed: u64, episode: Episode) -> Result<Trajectory> {
        let outcome = outcome_reward(episode.success);
        let tool_call = tool_call_reward(episode.turns.iter().filter(|t| t.tool_call_valid).count() as i64)?;
        let format = format_reward(episode.turns.iter().map(|t| t.well_formed));
        let reward = compose(outcome, tool_call, format, self.mu_t());
        Ok(Trajectory {
            task_seed,
            loss_mask: vec![true; episode.turns.len()],
            turns: episode.turns,
            success: episode.success,
            reward,
        })
    }

    fn update_options<'a>(features: &Features, config: &TrainConfig, reference: &'a PolicyParams) -> UpdateOptions<'a> {
        UpdateOptions {
            clip: features.clip,
            length_normalize: features.length_normalize,
            kl_penalty: (config.beta > 0.0).then_some((reference, config.beta)),
            learning_rate: config.learning_rate,
            mini_batch_size: config.mini_batch_size,
        }
    }

    /// One full training step with freshly collected rollouts.
    pub fn step(&mut self) -> Result<MetricsRecord> {
        let started = Instant::now();
        let snapshot = self.params.snapshot();
        let rollouts = self.collect_rollouts(&snapshot)?;
        let mut record = self.step_on(&snapshot, rollouts)?;
        record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(record)
    }

    /// One training step on the given rollouts, which must have been
    /// sampled from `snapshot`.
    pub fn step_on(&mut self, snapshot: &PolicySnapshot, rollouts: Vec<RolloutGroup>) -> Result<MetricsRecord> {
        let started = Instant::now();
        let cfg = &self.config;
        let mut diagnostics = Diagnostics::default();
        let mu_t = self.mu_t();
        let gamma_t = self.gamma_t();

        let mut groups = Vec::with_capacity(rollouts.len());
        let mut masked_trajectories = 0;
        for rg in rollouts {
            if rg.episodes.len() < 2 {
                return Err(Error::contract("a rollout group needs at least 2 episodes"));
            }
            let mut trajs = rg
                .episodes
                .into_iter()
                .map(|e| self.score(rg.task_seed, e))
                .collect::<Result<Vec<_>>>()?;
            if self.features.void_overlong_filter {
                masked_trajectories += filter_void_and_overlong(&mut trajs, cfg.max_response_turns as usize);
            }
            let (group, degenerate) = GroupBatch::new(rg.task_seed, trajs, self.features.normalize_by_std)?;
            diagnostics.degenerate_groups += u64::from(degenerate);
            groups.push(group);
        }
        if groups.is_empty() {
            return Err(Error::contract("a training step needs at least one group"));
        }

        // batch-level statistics over every rollout
        let all: Vec<&Trajectory> = groups.iter().flat_map(|g| &g.trajectories).collect();
        let n_traj = all.len() as f64;
        let success_rate = all.iter().filter(|t| t.success).count() as f64 / n_traj;
        let mean_total_reward = all.iter().map(|t| t.reward.total).sum::<f64>() / n_traj;
        let mean_n_tool_call = all.iter().map(|t| t.n_tool_call() as f64).sum::<f64>() / n_traj;
        let entropy = batch_entropy(all.iter().map(|t| t.state_actions()), snapshot)?;
        let all_turns: Vec<Turn> = all.iter().flat_map(|t| t.turns.iter().copied()).collect();

        for g in &groups {
            self.baseline.push(g.mean_reward());
        }

        let kept = match self.features.group_filter_ratio {
            Some(ratio) => {
                let keys: Vec<(f64, u64)> = groups.iter().map(|g| (g.reward_std, g.task_seed)).collect();
                let idx = filter_low_variance_groups(&keys, ratio);
                let mut slots: Vec<Option<GroupBatch>> = groups.into_iter().map(Some).collect();
                idx.into_iter().map(|i| slots[i].take().unwrap()).collect()
            }
            None => groups,
        };
        let groups_kept = kept.len();

        let opts = Self::update_options(&self.features, &self.config, &self.reference);
        let mut params = self.params.clone();
        let mut sil_stats = None;
        let mut sil_retained = 0;
        let branch;
        let on_stats;
        if !self.features.self_imitation {
            branch = Branch::OnPolicy;
            on_stats = on_policy_update(&mut params, &kept, &opts)?;
        } else if !self.replay.is_full() {
            branch = Branch::Fill;
            'admit: for g in &kept {
                for (traj, &adv) in g.trajectories.iter().zip(&g.advantages) {
                    if self.replay.is_full() {
                        break 'admit;
                    }
                    self.replay.maybe_store(traj, adv, self.t_iter)?;
                }
            }
            on_stats = on_policy_update(&mut params, &kept, &opts)?;
        } else {
            branch = Branch::Sil;
            let retained = self.replay.refilter(&self.baseline)?;
            sil_retained = retained.len();
            on_stats = on_policy_update(&mut params, &kept, &opts)?;
            let mut rng = RngStream::new(cfg.seed, Substream::new(SubstreamKind::ClipMask, self.t_iter, 0, 0));
            let clip = CovarianceClip {
                omega_lb: cfg.omega_lb,
                omega_ub: cfg.omega_ub,
                lambda: cfg.lambda,
            };
            sil_stats = Some(sil_update(&mut params, &retained, &opts, Some(&clip), gamma_t, &mut rng)?);
        }
        if branch == Branch::Sil {
            self.replay.drain();
        }
        self.params = params;

        diagnostics.ratio_overflows += on_stats.ratio_overflows;
        diagnostics.noop_updates += u64::from(on_stats.noop);
        if let Some(s) = &sil_stats {
            diagnostics.ratio_overflows += s.update.ratio_overflows;
            diagnostics.noop_updates += u64::from(s.update.noop);
        }

        let kl = kl_metric(&self.params, &self.reference, &all_turns)?;
        self.t_iter += 1;
        Ok(MetricsRecord {
            step: self.t_iter,
            branch,
            success_rate,
            mean_total_reward,
            entropy,
            mean_n_tool_call,
            replay_fill: self.replay.len(),
            clipped_token_fraction: sil_stats.map_or(0.0, |s| s.clipped_fraction()),
            gamma_t,
            mu_t,
            kl_metric: kl,
            on_policy_objective: on_stats.objective,
            sil_objective: sil_stats.map(|s| s.update.objective),
            sil_retained,
            groups_kept,
            masked_trajectories,
            diagnostics,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Greedy evaluation of the current policy on the configured eval seeds.
    pub fn evaluate(&self) -> Result<EvalSummary> {
        let seeds: Vec<u64> = (0..self.config.eval_num_seeds).map(|i| self.config.eval_seed_lo + i).collect();
        evaluate_greedy(&self.env, &self.params, &seeds)
    }
}
