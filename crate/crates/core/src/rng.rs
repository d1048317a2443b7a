//! Reproducible, splittable random streams.
//!
//! A stream is identified by `(seed, stream_id)` and backed by ChaCha8, whose
//! 64-bit stream selector gives independent sequences for the same key.
//! Parallel Monte Carlo splits work into fixed-size chunks, each drawing from
//! `stream.split(chunk_index)`, so results never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Concrete generator handed to samplers.
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Child stream `index`. Children of distinct parents or distinct indices
    /// use distinct keys.
    pub fn split(&self, index: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream_id: index,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Number of draws per chunk for chunked parallel sampling.
pub const CHUNK: usize = 4096;

/// Runs `f(chunk_stream, len)` over fixed chunks covering `n` draws and
/// returns the per-chunk results in chunk order.
pub fn chunked<T, F>(stream: &RngStream, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(RngStream, usize) -> T + Sync,
{
    use rayon::prelude::*;
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            f(stream.split(c as u64), len)
        })
        .collect()
}
