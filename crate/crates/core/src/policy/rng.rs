use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Different kinds never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SubstreamKind {
    Rollout = 1,
    TaskSeeds = 2,
    ClipMask = 3,
    Calibration = 4,
}

/// Identifies one independent stream: `(kind, step, group, trajectory)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substream {
    pub kind: SubstreamKind,
    pub step: u64,
    pub group: u64,
    pub index: u64,
}

impl Substream {
    pub fn new(kind: SubstreamKind, step: u64, group: u64, index: u64) -> Self {
        Self {
            kind,
            step,
            group,
            index,
        }
    }

    /// Packs into ChaCha's 64-bit stream id: 8 bits kind, 24 bits step,
    /// 16 bits group, 16 bits index.
    fn id(&self) -> u64 {
        assert!(self.step < 1 << 24, "step {} exceeds substream range", self.step);
        assert!(self.group < 1 << 16, "group {} exceeds substream range", self.group);
        assert!(self.index < 1 << 16, "index {} exceeds substream range", self.index);
        (self.kind as u64) << 56 | self.step << 32 | self.group << 16 | self.index
    }
}

/// Seeded counter-based stream. Same seed and substream give the same draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, substream: Substream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(substream.id());
        Self { inner }
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        self.inner.gen_range(lo..=hi)
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}
