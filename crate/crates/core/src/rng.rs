//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by `(seed, stream)`, so a
//! replicate can be regenerated from its index alone and parallel schedules
//! cannot change results.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Deterministic uniform/exponential source for one `(seed, stream)` pair.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw strictly inside `(0, 1)`, on the grid `(2k + 1) / 2^(m+1)`
    /// where `m + 1` is the mantissa width of `T`.
    pub fn uniform_open<T: Scalar>(&mut self) -> T {
        let m = mantissa_bits::<T>().min(52);
        let k = self.next_u64() >> (64 - m);
        let num = T::from_u64(2 * k + 1).expect("fits mantissa");
        num * T::lit(2.0).powi(-(m as i32 + 1))
    }

    /// Standard exponential draw.
    pub fn exponential<T: Scalar>(&mut self) -> T {
        -self.uniform_open::<T>().ln()
    }
}

fn mantissa_bits<T: Scalar>() -> u32 {
    // epsilon = 2^(1 - digits)
    (-T::epsilon().log2()).round().to_u32().unwrap_or(23)
}

/// SplitMix64 finalizer, used to derive child seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(master, a, b)`; distinct index pairs give unrelated seeds.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(master) ^ a.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ b)
}
