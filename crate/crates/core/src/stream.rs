//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a seed and a
//! structural key (node path, edge, slab index, replica index). Nothing
//! depends on the order in which a simulation happens to ask for it.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Keyed hash of two words. Not symmetric.
#[inline]
pub fn hash2(a: u64, b: u64) -> u64 {
    mix64(mix64(a ^ GOLDEN).wrapping_add(b).wrapping_mul(0xd6e8_feb8_6659_fd93) ^ b.rotate_left(29))
}

#[inline]
pub fn hash3(a: u64, b: u64, c: u64) -> u64 {
    hash2(hash2(a, b), c)
}

/// Maps 64 random bits to a double in `[0, 1)`.
#[inline]
pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Sequential SplitMix64 stream positioned by a seed.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { state: mix64(seed) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        unit(self.next_u64())
    }

    /// Uniform in `(0, 1]`, safe to pass to `ln`.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.uniform_open0()) / rate
    }

    /// Poisson variate by inversion; intended for small means.
    pub fn poisson(&mut self, mean: f64) -> u32 {
        let u = self.uniform();
        let mut p = libm::exp(-mean);
        let mut cdf = p;
        let mut k = 0u32;
        while u >= cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p < 1e-300 && k as f64 > mean {
                break;
            }
        }
        k
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// 64-bit digest of a byte string.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    bytes.chunks(8).fold(mix64(bytes.len() as u64), |h, chunk| {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        hash2(h, u64::from_le_bytes(word))
    })
}

/// Seed streams derived from a master seed.
pub mod tags {
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const DYNAMICS: u64 = 0x4459_4e41;
    pub const TREE: u64 = 0x5452_4545;
    pub const CONFIG: u64 = 0x434f_4e46;
    pub const ACCEPT: u64 = 0x4143_4350;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
}

/// Seed for stream `tag` of replica `index` under `master`.
pub fn replica_seed(master: u64, index: u64, tag: u64) -> u64 {
    hash3(master, index, tag)
}
