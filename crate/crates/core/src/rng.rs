//! Counter-based pseudo-random numbers for reproducible sampling.
//!
//! The generator is SplitMix64 run in counter mode: the `i`-th output of a
//! stream is a pure function of `(seed, stream, i)`, so any draw can be
//! addressed directly without generating its predecessors. Estimates built
//! from indexed draws are therefore independent of how the index range is
//! partitioned into batches.
//!
//! Sub-streams are fixed by [`SubStream`]; Monte-Carlo code documents which
//! stream and which index each draw uses.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Steele, Lea & Flood's `mix64`).
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named sub-streams. Each stream of a given seed is statistically
/// independent of the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubStream {
    /// Primary outcome draws (the `Y` variables of the resampling scheme).
    YDraws,
    /// Independent-copy draws (the `Z` variables).
    ZDraws,
    /// Random-subset draws (the retained set `A`).
    ADraws,
    /// Exponential clocks of the subset Markov process.
    Clocks,
    /// Anything else (test-data generation and the like).
    General,
}

impl SubStream {
    fn id(self) -> u64 {
        match self {
            SubStream::YDraws => 0,
            SubStream::ZDraws => 1,
            SubStream::ADraws => 2,
            SubStream::Clocks => 3,
            SubStream::General => 4,
        }
    }
}

/// A counter-mode SplitMix64 stream.
///
/// Construction fixes `(seed, stream)`; outputs are indexed. The stateful
/// [`next_u64`](CounterRng::next_u64) interface walks the indices in order,
/// while [`u64_at`](CounterRng::u64_at) gives random access.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: SubStream) -> Self {
        CounterRng {
            key: mix64(seed.wrapping_add(stream.id().wrapping_mul(GOLDEN_GAMMA))),
            counter: 0,
        }
    }

    /// The `index`-th output of this stream, independent of generator state.
    #[inline]
    pub fn u64_at(&self, index: u64) -> u64 {
        mix64(
            self.key
                .wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    /// Uniform draw in `[0, 1)` at the given index (53-bit resolution).
    #[inline]
    pub fn f64_at(&self, index: u64) -> f64 {
        (self.u64_at(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.u64_at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        let v = self.next_u64();
        (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n` (`n > 0`; modulo bias is irrelevant at the
    /// sizes used here).
    pub fn next_index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
