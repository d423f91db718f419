use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Streams with the same seed and different ids use disjoint ChaCha
/// nonces, so per-path streams are independent without any coordination
/// between workers.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on (0, 1]; safe to take logarithms of.
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Unit-rate exponential via `-ln(1 - u)`.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        -self.uniform_pos().ln()
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        if !(rate > 0.0) || !rate.is_finite() {
            return invalid(format!("exponential rate must be positive and finite, got {rate}"));
        }
        Ok(self.exp1() / rate)
    }
}

/// Inverse-CDF map used by [`RngStream::exponential`].
pub fn exponential_from_uniform(u: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return invalid(format!("exponential rate must be positive, got {rate}"));
    }
    if !(0.0..1.0).contains(&u) {
        return invalid(format!("uniform draw must lie in [0,1), got {u}"));
    }
    Ok(-(1.0 - u).ln() / rate)
}
