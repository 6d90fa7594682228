//! Shared fixtures for the benchmarks.

use sil_core::{TrainConfig, Trainer, Variant};

/// A CalcChain trainer with the default batch shape.
pub fn calc_chain_trainer(variant: Variant) -> Trainer {
    let cfg = TrainConfig::for_env("calc_chain").expect("calc_chain is a known env");
    Trainer::new(cfg, variant).expect("default config is valid")
}

/// Deterministic pseudo-random values in `[0, 1)`.
pub fn values(n: usize, seed: u64) -> Vec<f64> {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}
