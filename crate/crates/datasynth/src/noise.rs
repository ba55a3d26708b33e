//! Mixed Poisson-Gaussian sensor noise: Poisson(y g) / g + N(0, sigma^2).

use ndauto::{Array, Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

#[derive(Clone, Copy, Debug)]
pub struct NoiseModel {
    /// Photons per count.
    pub gain: f64,
    /// Read-noise standard deviation, in counts.
    pub read_sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(gain: f64, read_sigma: f64, seed: u64) -> Result<NoiseModel> {
        if gain <= 0.0 {
            return Err(Error::InvalidArgument(format!("noise gain must be positive, got {gain}")));
        }
        if read_sigma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "read sigma must be nonnegative, got {read_sigma}"
            )));
        }
        Ok(NoiseModel {
            gain,
            read_sigma,
            seed,
        })
    }

    /// Stream for one measurement, separated from the model seed.
    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        let mut z = self.seed ^ 0x6a09e667f3bcc909u64.wrapping_mul(index.wrapping_add(1));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
    }
}

/// Applies the mixed model per pixel with the given stream. Negative input
/// pixels are rejected.
pub fn add_noise_with_rng(y: &Array, model: &NoiseModel, rng: &mut ChaCha8Rng) -> Result<Array> {
    let mut out = y.clone();
    let inv_gain = 1.0 / model.gain;
    for v in out.data_mut() {
        if *v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "add_noise: negative input pixel {v}"
            )));
        }
        let lambda = *v * model.gain;
        let shot = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::InvalidArgument(format!("poisson({lambda}): {e}")))?
                .sample(rng)
        } else {
            0.0
        };
        let read = if model.read_sigma > 0.0 {
            Normal::new(0.0, model.read_sigma).unwrap().sample(rng)
        } else {
            0.0
        };
        *v = shot * inv_gain + read;
    }
    Ok(out)
}

/// Deterministic given the model seed.
pub fn add_noise(y: &Array, model: &NoiseModel) -> Result<Array> {
    let mut rng = model.rng_for(0);
    add_noise_with_rng(y, model, &mut rng)
}
