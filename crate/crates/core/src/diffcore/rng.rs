//! Seeded counter-based pseudo-random streams.
//!
//! Draws are keyed Threefry-2x64 blocks indexed by a per-stream counter, so a
//! stream is a pure function of (key, draw index). Substreams derive fresh
//! keys from a reserved block domain, which keeps any tree of splits
//! reproducible across runs and across parallel schedules.

use super::array::RealVector;

const SKEIN_KS_PARITY: u64 = 0x1BD1_1BDA_A9FC_1A22;
const ROTATIONS: [u32; 8] = [16, 42, 12, 31, 16, 32, 24, 21];

/// Counter blocks with this tag are reserved for substream key derivation;
/// ordinary draws use tag 0.
const SPLIT_TAG: u64 = 0x5EED_5EED_5EED_5EED;
const SEED_KEY1: u64 = 0x3C79_AC49_2BA7_B653;

fn threefry2x64(key: [u64; 2], ctr: [u64; 2]) -> [u64; 2] {
    let ks = [key[0], key[1], key[0] ^ key[1] ^ SKEIN_KS_PARITY];
    let mut x0 = ctr[0].wrapping_add(ks[0]);
    let mut x1 = ctr[1].wrapping_add(ks[1]);
    for r in 0..20u64 {
        x0 = x0.wrapping_add(x1);
        x1 = x1.rotate_left(ROTATIONS[(r % 8) as usize]);
        x1 ^= x0;
        if (r + 1) % 4 == 0 {
            let s = ((r + 1) / 4) as usize;
            x0 = x0.wrapping_add(ks[s % 3]);
            x1 = x1.wrapping_add(ks[(s + 1) % 3]).wrapping_add(s as u64);
        }
    }
    [x0, x1]
}

/// A seeded, splittable random stream.
///
/// Identical seed and identical draw sequence give identical outputs.
/// `substream` children have keys derived from a counter domain disjoint from
/// the draw domain, so no substream replays its parent's sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: [u64; 2],
    ctr: u64,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        RngStream {
            key: [seed, SEED_KEY1],
            ctr: 0,
        }
    }

    /// Derives the `id`-th independent child stream. Does not advance `self`.
    pub fn substream(&self, id: u64) -> RngStream {
        RngStream {
            key: threefry2x64(self.key, [id, SPLIT_TAG]),
            ctr: 0,
        }
    }

    /// Identifies this stream's key and position, for provenance records.
    pub fn provenance(&self) -> (u64, u64, u64) {
        (self.key[0], self.key[1], self.ctr)
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = threefry2x64(self.key, [self.ctr, 0]);
        self.ctr += 1;
        out[0]
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal draw via Box-Muller. Consumes exactly two blocks.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal_vec(&mut self, n: usize) -> RealVector {
        RealVector::new((0..n).map(|_| self.normal()).collect())
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
