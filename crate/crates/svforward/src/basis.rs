//! Synthetic low-rank shift-variant PSF bases: per-lens kernel stacks paired
//! with smooth coefficient maps that broaden and dim the effective PSF toward
//! the field edge.

use ndauto::{Array, Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Geometry, NUM_LENSES};

/// Rank-R decomposition of one lens's shift-variant PSF.
#[derive(Clone, Debug, PartialEq)]
pub struct SvBasis {
    pub lens_id: usize,
    /// R kernels of k x k, each L1-normalized.
    pub kernels: Vec<Array>,
    /// R coefficient maps of H_obj x W_obj, finite and nonnegative.
    pub coeff_maps: Vec<Array>,
}

impl SvBasis {
    pub fn rank(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels[0].dim(0)
    }

    pub fn object_shape(&self) -> (usize, usize) {
        (self.coeff_maps[0].dim(0), self.coeff_maps[0].dim(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.kernels.len() != self.coeff_maps.len() {
            return Err(Error::InvalidArgument(format!(
                "basis rank mismatch: {} kernels, {} coefficient maps",
                self.kernels.len(),
                self.coeff_maps.len()
            )));
        }
        let k = self.kernels[0].shape().to_vec();
        let m = self.coeff_maps[0].shape().to_vec();
        for kn in &self.kernels {
            if kn.shape() != k.as_slice() {
                return Err(Error::shape("SvBasis kernels", format!("{k:?}"), format!("{:?}", kn.shape())));
            }
        }
        for map in &self.coeff_maps {
            if map.shape() != m.as_slice() {
                return Err(Error::shape("SvBasis maps", format!("{m:?}"), format!("{:?}", map.shape())));
            }
            if !map.is_finite() || map.data().iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidArgument(
                    "coefficient maps must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BasisConfig {
    pub rank: usize,
    pub kernel_size: usize,
    /// Vignetting depth: gain falls to `1 - edge_strength` at the field corner.
    pub edge_strength: f64,
    /// Amplitude of the sinusoidal modulation on the widest component's map.
    pub ripple_amp: f64,
    /// Cycles of that modulation across the field.
    pub ripple_freq: f64,
    /// Forces all coefficient maps to 1 (degenerate shift-invariant case).
    pub constant_coeffs: bool,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            rank: 3,
            kernel_size: 9,
            edge_strength: 0.7,
            ripple_amp: 0.35,
            ripple_freq: 3.0,
            constant_coeffs: false,
        }
    }
}

fn lens_rng(seed: u64, lens: usize) -> ChaCha8Rng {
    // splitmix-style stream separation per lens
    let mut z = seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(lens as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Normalized Gaussian blob at a sub-pixel offset from the kernel center.
fn gaussian_kernel(k: usize, sigma: f64, dy: f64, dx: f64) -> Array {
    let half = (k as f64 - 1.0) / 2.0;
    let mut data = Vec::with_capacity(k * k);
    for y in 0..k {
        for x in 0..k {
            let ry = y as f64 - half - dy;
            let rx = x as f64 - half - dx;
            data.push((-(ry * ry + rx * rx) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = data.iter().sum();
    for v in &mut data {
        *v /= total;
    }
    Array::from_vec(&[k, k], data).expect("kernel shape")
}

/// Deterministic 9-lens basis synthesis. Component r has an increasingly
/// wide, increasingly offset kernel; its coefficient map concentrates weight
/// toward the field edge, so the local PSF sharpens at the center and
/// broadens and dims toward the corners.
pub fn synth_basis(geometry: &Geometry, cfg: &BasisConfig, seed: u64) -> Result<Vec<SvBasis>> {
    if cfg.rank < 1 {
        return Err(Error::InvalidArgument("basis rank must be >= 1".into()));
    }
    if cfg.kernel_size % 2 == 0 || cfg.kernel_size < 3 {
        return Err(Error::InvalidArgument(format!(
            "kernel size must be odd and >= 3, got {}",
            cfg.kernel_size
        )));
    }
    let (h, w) = geometry.subview;
    let k = cfg.kernel_size;
    let max_sigma = k as f64 / 4.0;

    let mut bases = Vec::with_capacity(NUM_LENSES);
    for lens in 0..NUM_LENSES {
        let mut rng = lens_rng(seed, lens);
        let mut kernels = Vec::with_capacity(cfg.rank);
        let mut coeff_maps = Vec::with_capacity(cfg.rank);
        for r in 0..cfg.rank {
            let t = if cfg.rank == 1 { 0.0 } else { r as f64 / (cfg.rank - 1) as f64 };
            let sigma = (0.8 + t * (max_sigma - 0.8)).min(max_sigma);
            // sharp central component stays centered; wider ones drift
            let off = t * 1.8;
            let dy = off * rng.gen_range(-1.0..1.0);
            let dx = off * rng.gen_range(-1.0..1.0);
            kernels.push(gaussian_kernel(k, sigma, dy, dx));

            let map = if cfg.constant_coeffs {
                Array::filled(&[h, w], 1.0)
            } else {
                let gain_jitter = 1.0 + 0.1 * rng.gen_range(-1.0..1.0);
                let mut map = Array::zeros(&[h, w]);
                for y in 0..h {
                    for x in 0..w {
                        let (u, v) = geometry.norm_coord(y, x);
                        let rho2 = 0.5 * (u * u + v * v);
                        let gain = (1.0 - cfg.edge_strength * rho2).max(0.05);
                        // Bernstein-style radial profile: component r peaks
                        // farther out as t grows
                        let profile = (1.0 - rho2).powf(1.0 - t) * rho2.powf(t);
                        let mut value = gain_jitter * gain * profile;
                        if r == cfg.rank - 1 && cfg.ripple_amp > 0.0 {
                            let ripple = 1.0
                                + cfg.ripple_amp
                                    * (std::f64::consts::PI * cfg.ripple_freq * u).sin()
                                    * (std::f64::consts::PI * cfg.ripple_freq * v).sin();
                            value *= ripple;
                        }
                        map.set2(y, x, value.max(0.0));
                    }
                }
                map
            };
            coeff_maps.push(map);
        }
        let basis = SvBasis {
            lens_id: lens,
            kernels,
            coeff_maps,
        };
        basis.validate()?;
        bases.push(basis);
    }
    Ok(bases)
}
