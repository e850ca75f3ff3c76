//! Stream PRNG used by the traffic generators.
//!
//! The algorithm is fixed so that streams can be reproduced bit-exactly by
//! other implementations:
//!
//! * seeding: SplitMix64 (`z += 0x9E3779B97F4A7C15; z = (z ^ (z >> 30)) *
//!   0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31)`)
//! * stream seed: `mix(mix(mix(seed) ^ station) ^ (stream + 1))`, where `mix`
//!   is one SplitMix64 step starting from its argument
//! * generator: xorshift64* (`x ^= x >> 12; x ^= x << 25; x ^= x >> 27;
//!   output x * 0x2545F4914F6CDD1D`); a zero state is replaced by
//!   `0x9E3779B97F4A7C15`
//! * uniform in (0, 1]: `((out >> 11) + 1) * 2^-53`

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step applied to `z`.
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `stream` of station `station` under run seed `seed`.
pub fn stream_seed(seed: u64, station: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ station) ^ stream.wrapping_add(1))
}

/// xorshift64* generator.
#[derive(Clone, Debug)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let state = if seed == 0 { GOLDEN } else { seed };
        XorShift64Star { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on (0, 1].
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential variate with the given mean.
    pub fn next_exp(&mut self, mean: f64) -> f64 {
        -libm::log(self.next_open01()) * mean
    }
}
