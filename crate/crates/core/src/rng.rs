//! Deterministic random streams. Every (seed, replication, class, purpose)
//! tuple gets its own ChaCha stream, so runs are reproducible regardless of
//! scheduling order and policies can share sample paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Arrival,
    Service,
    Oracle,
    Bandit,
    Config,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Arrival => 1,
            StreamKind::Service => 2,
            StreamKind::Oracle => 3,
            StreamKind::Bandit => 4,
            StreamKind::Config => 5,
        }
    }
}

pub fn stream(seed: u64, replication: u64, class: u64, kind: StreamKind) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 32) ^ (class << 8) ^ kind.tag());
    rng
}
