//! Per-iteration random streams.
//!
//! Every (seed, iteration, stream name) triple maps to its own ChaCha8
//! stream: the key comes from the master seed and the 64-bit stream id from
//! the iteration index and the name. Streams are therefore independent of
//! which worker runs the iteration or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};

pub const RATES: &str = "rates";
/// Rate stream for the second model when common random numbers are off.
pub const RATES_INDEPENDENT: &str = "rates-independent";

pub fn credit_stream_name(model: crate::model::CreditModel) -> String {
    format!("credit-{}", model.label())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn stream_id(iteration: u64, name: &str) -> u64 {
    splitmix64(fnv1a(name.as_bytes()) ^ splitmix64(iteration))
}

/// Random source for one named stream of one iteration.
#[derive(Debug, Clone)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: u64, iteration: u64, name: &str) -> Self {
        let mut key = [0u8; 32];
        let mut s = seed;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id(iteration, name));
        Stream(rng)
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.0.sample(Open01)
    }
}
