//! Counter-based random streams.
//!
//! Every variate in a run is drawn from a stream addressed by a
//! [`StreamKey`]: the master seed, a role tag, the replication index and the
//! `(exploration, repetition)` cell. Regenerating a stream from the same key
//! reproduces its sequence exactly, so any cell can be recomputed in
//! isolation and cells can be filled in any order on any number of workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Input design `X`.
    InputX,
    /// Independent input design `X̃` used for the redrawn coordinates.
    InputXTilde,
    /// Model noise for base-branch cells, pilot included.
    Base,
    /// Model noise for the pick-frozen branch of group `j` (zero-based).
    Freeze(u32),
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::InputX => 1,
            Role::InputXTilde => 2,
            Role::Base => 3,
            Role::Freeze(j) => 0x100 + u64::from(j),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub role: Role,
    pub replication: u64,
    pub exploration: u64,
    pub repetition: u64,
}

impl StreamKey {
    pub fn new(seed: u64, role: Role, replication: u64, exploration: u64, repetition: u64) -> Self {
        StreamKey {
            seed,
            role,
            replication,
            exploration,
            repetition,
        }
    }
}

const DOMAIN: u64 = 0x534e_4d43_5354_524d;

/// Deterministic variate source handed to a model for one evaluation.
///
/// The ChaCha key carries `(seed, role, replication)` and the 64-bit stream
/// id packs `(exploration, repetition)` as two 32-bit halves.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(key: StreamKey) -> Self {
        assert!(
            key.exploration < 1 << 32 && key.repetition < 1 << 32,
            "cell index out of stream range"
        );
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&key.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&key.role.tag().to_le_bytes());
        seed[16..24].copy_from_slice(&key.replication.to_le_bytes());
        seed[24..32].copy_from_slice(&DOMAIN.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream((key.exploration << 32) | key.repetition);
        NoiseStream { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform01(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform01()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for NoiseStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
