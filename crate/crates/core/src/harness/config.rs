//! Flat `key = value` config files.
//!
//! ```text
//! # comments and blank lines are ignored
//! env.name = calc_chain
//! env.seed_lo = 0
//! eps_lb = 0.2
//! eps_ub = 0.28
//! N_D = 64
//! ```
//!
//! Every key is optional; missing keys take the defaults of
//! [`TrainConfig::for_env`]. Unknown or repeated keys are rejected.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Every accepted key, in echo order.
pub const KEYS: [&str; 29] = [
    "env.name",
    "env.seed_lo",
    "env.seed_hi",
    "env.max_turns",
    "max_response_turns",
    "train_batch_size",
    "n_samples_per_prompt",
    "num_steps",
    "actor_learning_rate",
    "ppo_mini_batch_size",
    "seed",
    "eps_lb",
    "eps_ub",
    "C",
    "beta",
    "lambda",
    "omega_lb",
    "omega_ub",
    "rollout_filter_ratio",
    "norm_adv_by_std_in_grpo",
    "N_D",
    "N_D_R",
    "baseline_percentile",
    "T_warmup",
    "T_decay",
    "eval.seed_lo",
    "eval.num_seeds",
    "calibrate.top_lb_percent",
    "calibrate.top_ub_percent",
];

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut values: HashMap<&str, (&str, usize)> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(line, format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::config(key, unknown_key_message(key)));
        }
        if values.insert(key, (value, lineno + 1)).is_some() {
            return Err(Error::config(key, format!("line {}: key given twice", lineno + 1)));
        }
    }

    let env_name = values.get("env.name").map_or("calc_chain", |v| v.0);
    let mut c = TrainConfig::for_env(env_name)?;
    let max_response_set = values.contains_key("max_response_turns");
    for (key, (value, _)) in &values {
        let key = *key;
        match key {
            "env.name" => {}
            "env.seed_lo" => c.seed_lo = parse(key, value)?,
            "env.seed_hi" => c.seed_hi = parse(key, value)?,
            "env.max_turns" => c.max_turns = parse(key, value)?,
            "max_response_turns" => c.max_response_turns = parse(key, value)?,
            "train_batch_size" => c.train_batch_size = parse(key, value)?,
            "n_samples_per_prompt" => c.group_size = parse(key, value)?,
            "num_steps" => c.num_steps = parse(key, value)?,
            "actor_learning_rate" => c.learning_rate = parse(key, value)?,
            "ppo_mini_batch_size" => c.mini_batch_size = parse(key, value)?,
            "seed" => c.seed = parse(key, value)?,
            "eps_lb" => c.eps_lb = parse(key, value)?,
            "eps_ub" => c.eps_ub = parse(key, value)?,
            "C" => c.clip_c = parse(key, value)?,
            "beta" => c.beta = parse(key, value)?,
            "lambda" => c.lambda = parse(key, value)?,
            "omega_lb" => c.omega_lb = parse(key, value)?,
            "omega_ub" => c.omega_ub = parse(key, value)?,
            "rollout_filter_ratio" => c.rollout_filter_ratio = parse(key, value)?,
            "norm_adv_by_std_in_grpo" => c.norm_adv_by_std = parse(key, value)?,
            "N_D" => c.replay_capacity = parse(key, value)?,
            "N_D_R" => c.baseline_capacity = parse(key, value)?,
            "baseline_percentile" => c.baseline_percentile = parse(key, value)?,
            "T_warmup" => c.t_warmup = parse(key, value)?,
            "T_decay" => c.t_decay = parse(key, value)?,
            "eval.seed_lo" => c.eval_seed_lo = parse(key, value)?,
            "eval.num_seeds" => c.eval_num_seeds = parse(key, value)?,
            "calibrate.top_lb_percent" => c.calibrate_top_lb_percent = parse(key, value)?,
            "calibrate.top_ub_percent" => c.calibrate_top_ub_percent = parse(key, value)?,
            _ => unreachable!("key list checked above"),
        }
    }
    if !max_response_set {
        c.max_response_turns = c.max_turns;
    }
    c.validate()?;
    Ok(c)
}

/// Effective values of every key, one per line, in [`KEYS`] order.
pub fn to_config_text(c: &TrainConfig) -> String {
    let values: [String; 29] = [
        c.env_name.clone(),
        c.seed_lo.to_string(),
        c.seed_hi.to_string(),
        c.max_turns.to_string(),
        c.max_response_turns.to_string(),
        c.train_batch_size.to_string(),
        c.group_size.to_string(),
        c.num_steps.to_string(),
        c.learning_rate.to_string(),
        c.mini_batch_size.to_string(),
        c.seed.to_string(),
        c.eps_lb.to_string(),
        c.eps_ub.to_string(),
        c.clip_c.to_string(),
        c.beta.to_string(),
        c.lambda.to_string(),
        c.omega_lb.to_string(),
        c.omega_ub.to_string(),
        c.rollout_filter_ratio.to_string(),
        c.norm_adv_by_std.to_string(),
        c.replay_capacity.to_string(),
        c.baseline_capacity.to_string(),
        c.baseline_percentile.to_string(),
        c.t_warmup.to_string(),
        c.t_decay.to_string(),
        c.eval_seed_lo.to_string(),
        c.eval_num_seeds.to_string(),
        c.calibrate_top_lb_percent.to_string(),
        c.calibrate_top_ub_percent.to_string(),
    ];
    let mut out = String::new();
    for (k, v) in KEYS.iter().zip(values) {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// SHA-256 of the effective config text.
pub fn config_hash(c: &TrainConfig) -> [u8; 32] {
    Sha256::digest(to_config_text(c).as_bytes()).into()
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse {value:?}: {e}")))
}

fn unknown_key_message(key: &str) -> String {
    let nearest = KEYS
        .iter()
        .min_by_key(|k| strsim::levenshtein(key, k))
        .expect("key list is non-empty");
    format!("unknown key; did you mean `{nearest}`?")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, TrainConfig::for_env("calc_chain").unwrap());
    }

    #[test]
    fn accepts_clip_bounds() {
        let c = parse_config("eps_ub = 0.28\neps_lb = 0.2\n").unwrap();
        assert_eq!((c.eps_lb, c.eps_ub), (0.2, 0.28));
    }

    #[test]
    fn rejects_inverted_clip_bounds_by_name() {
        let err = parse_config("eps_lb = 0.3\neps_ub = 0.2").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "eps_ub"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_key_suggests_nearest() {
        let err = parse_config("learning_rat = 0.1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("learning_rat"), "{msg}");
        assert!(msg.contains("actor_learning_rate"), "{msg}");
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(parse_config("seed = 1\nseed = 2").is_err());
        assert!(parse_config("seed 1").is_err());
        let err = parse_config("seed = abc").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "seed"));
    }

    #[test]
    fn env_defaults_follow_env_name() {
        let c = parse_config("env.name = key_door").unwrap();
        assert_eq!(c.max_turns, 30);
        assert_eq!(c.max_response_turns, 30);
        let c = parse_config("env.name = key_door\nenv.max_turns = 12").unwrap();
        assert_eq!(c.max_response_turns, 12);
        assert!(parse_config("env.name = nope").is_err());
    }

    #[test]
    fn comments_ignored() {
        let c = parse_config("# header\nseed = 5 # trailing\n\n").unwrap();
        assert_eq!(c.seed, 5);
    }
}
