//! Seeded, splittable random streams for reproducible parallel Monte Carlo.
//!
//! Every logical stream is addressed by `(experiment_seed, purpose, index)`
//! and, within a trial stream, by a step counter. Distinct addresses give
//! independent ChaCha streams, so trials can run on any worker in any order
//! and still produce bit-identical results.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream namespaces. Keeps Monte Carlo trials, optimizer restarts and
/// verification-suite draws from ever sharing a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    FalseAlarmTrial = 1,
    DelayTrial = 2,
    OptimizerRestart = 3,
    Verification = 4,
    Simulation = 5,
}

/// Root handle for an experiment's randomness, identified by its seed.
#[derive(Debug, Clone, Copy)]
pub struct RngHandle {
    seed: u64,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn stream_id(kind: StreamKind, index: u64) -> u64 {
        assert!(index < (1 << 48), "stream index too large");
        ((kind as u64) << 48) | index
    }

    /// Counter-based per-step stream for one trial.
    pub fn trial(&self, kind: StreamKind, trial_index: u64) -> TrialRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(Self::stream_id(kind, trial_index));
        TrialRng { rng, next_step: 0 }
    }

    /// Sequential stream for non-trial consumers (optimizer restarts,
    /// random-instance generators).
    pub fn sequence(&self, kind: StreamKind, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(Self::stream_id(kind, index));
        rng
    }
}

/// One trial's stream: the uniform at step `n` is a pure function of
/// `(seed, stream, n)`. Sequential access is the fast path; random access
/// repositions the underlying counter.
pub struct TrialRng {
    rng: ChaCha8Rng,
    next_step: u64,
}

impl TrialRng {
    /// Uniform in [0,1) at the given step index.
    pub fn uniform_at(&mut self, step: u64) -> f64 {
        if step != self.next_step {
            // each step consumes one u64 = two 32-bit words
            self.rng.set_word_pos(2 * step as u128);
        }
        self.next_step = step + 1;
        u64_to_unit_f64(self.rng.next_u64())
    }
}

/// Map a u64 to [0,1) using the top 53 bits.
#[inline]
pub fn u64_to_unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
