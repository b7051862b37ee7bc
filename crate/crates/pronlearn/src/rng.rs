//! Deterministic counter-based random source.
//!
//! A small SplitMix64 generator with an explicit stream key. Streams keyed
//! by `(seed, index)` let independent work items (corpus sentences, vocab
//! words) draw randomness concurrently with run-order-independent results.
//! The algorithm is fixed for the life of the file formats: serialized
//! artifacts depend on it being byte-stable.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitRng {
    state: u64,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        SplitRng {
            state: mix(seed.wrapping_add(GOLDEN)),
        }
    }

    /// Generator for stream `stream` under `seed`; distinct streams are
    /// statistically independent.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        SplitRng {
            state: mix(mix(seed.wrapping_add(GOLDEN)) ^ stream.wrapping_mul(GOLDEN) ^ GOLDEN),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, n)`. `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// Uniform integer in `[lo, hi]` inclusive.
    #[inline]
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        lo + self.index(hi - lo + 1)
    }
}
