use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Address of a reproducible random stream.
///
/// A `(master_seed, stream_index)` pair always materializes the same
/// generator, independent of thread schedule or call order, so Monte Carlo
/// trial `t` can run anywhere as long as it uses stream `t`. ChaCha's
/// 64-bit stream parameter carries the index, so streams never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_index: 0,
        }
    }

    pub fn stream(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Derived stream for sub-task `salt`; mixing avoids collisions between
    /// nested derivations (trial -> layer -> draw).
    pub fn child(&self, salt: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_index: splitmix64(self.stream_index ^ splitmix64(salt)),
        }
    }

    /// Materializes the generator for this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}
