//! Deterministic, splittable random streams.
//!
//! A stream is identified by `(seed, stream_id)`. Child derivation is a
//! pure function of those two words, so a parallel scheduler can hand
//! every task its own stream and collect bit-identical results in any
//! order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

// splitmix64 finalizer; full-avalanche 64 -> 64 mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    /// Root stream of an experiment.
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream for task `index`. Same seed, mixed stream id.
    #[must_use]
    pub fn child(&self, index: u64) -> Self {
        let id = mix64(
            self.stream_id
                .rotate_left(17)
                .wrapping_add(0x9e37_79b9_7f4a_7c15)
                ^ mix64(index.wrapping_add(0x6a09_e667_f3bc_c909)),
        );
        Self {
            seed: self.seed,
            stream_id: id,
        }
    }

    /// Instantiates the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = mix64(self.seed ^ 0x1234_5678_9abc_def0)
            ^ mix64(self.stream_id.wrapping_add(0x0123_4567_89ab_cdef));
        for chunk in key.chunks_mut(8) {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
