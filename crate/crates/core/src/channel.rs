//! Transmission channel between the two ends of the link.
//!
//! The additive white Gaussian noise model is counter-based: the draw for
//! sample `index` depends only on `(seed, index)`. It is generated as
//! follows:
//!
//! 1. a ChaCha8 stream is keyed with `ChaCha8Rng::seed_from_u64(seed)`;
//! 2. the stream is positioned at 32-bit word `4 * index`;
//! 3. two `u64` words `a`, `b` are read and mapped to uniforms
//!    `u1 = (a >> 11 + 1) / 2^53` in `(0, 1]` and `u2 = (b >> 11) / 2^53` in `[0, 1)`;
//! 4. the standard normal draw is `sqrt(-2 ln u1) * cos(2 pi u2)` (Box-Muller),
//!    scaled by `sigma`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Ideal,
    Awgn { sigma: f64, seed: u64 },
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel::Ideal
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelModel::Ideal => Ok(()),
            ChannelModel::Awgn { sigma, .. } if sigma.is_finite() && sigma >= 0.0 => Ok(()),
            ChannelModel::Awgn { sigma, .. } => Err(Error::invalid(
                "channel.sigma",
                format!("must be finite and >= 0, got {sigma}"),
            )),
        }
    }

    /// Passes one exchanged sample through the channel.
    pub fn apply(&self, sample: f64, index: u64) -> f64 {
        match *self {
            ChannelModel::Ideal => sample,
            ChannelModel::Awgn { sigma, .. } if sigma == 0.0 => sample,
            ChannelModel::Awgn { sigma, seed } => sample + sigma * standard_normal(seed, index),
        }
    }
}

/// Free-function form of [`ChannelModel::apply`].
pub fn channel_apply(ch: &ChannelModel, sample: f64, index: u64) -> f64 {
    ch.apply(sample, index)
}

/// Standard normal draw number `index` of the stream keyed by `seed`.
pub fn standard_normal(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(4 * index as u128);
    let a = rng.next_u64();
    let b = rng.next_u64();
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
