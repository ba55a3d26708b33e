//! Ground-truth preprocessing and procedural source imagery.

use ndauto::{Array, Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Percentile by linear interpolation over the sorted values
/// (`pos = p/100 * (n-1)`).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

/// Background suppression and contrast normalization: subtracts the p-th
/// percentile, clamps at zero, divides by the resulting maximum. Output in
/// [0, 1]; an all-zero (or constant) input maps to all zeros.
pub fn preprocess_gt(img: &Array, p: f64) -> Result<Array> {
    if !img.is_finite() {
        return Err(Error::NonFinite("preprocess_gt input".into()));
    }
    let bg = percentile(img.data(), p);
    let shifted = img.map(|v| (v - bg).max(0.0));
    let max = shifted.data().iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 {
        return Ok(Array::zeros(img.shape()));
    }
    Ok(shifted.map(|v| v / max))
}

#[derive(Clone, Copy, Debug)]
pub struct PhantomConfig {
    /// Expected disks per 100x100 pixel area.
    pub density: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            density: 6.0,
            radius_min: 1.5,
            radius_max: 4.0,
            intensity_min: 0.4,
            intensity_max: 1.0,
        }
    }
}

/// Fluorescent particle phantom: random soft-edged disks, additive, clipped
/// to [0, 1]. Density 0 gives a blank field.
pub fn gen_phantom(h: usize, w: usize, cfg: &PhantomConfig, rng: &mut ChaCha8Rng) -> Array {
    let n = (cfg.density * (h * w) as f64 / 1e4).round() as usize;
    let mut img = Array::zeros(&[h, w]);
    for _ in 0..n {
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let radius = rng.gen_range(cfg.radius_min..=cfg.radius_max);
        let amp = rng.gen_range(cfg.intensity_min..=cfg.intensity_max);
        let r_out = radius + 1.0;
        let y0 = (cy - r_out).floor().max(0.0) as usize;
        let y1 = ((cy + r_out).ceil() as usize).min(h - 1);
        let x0 = (cx - r_out).floor().max(0.0) as usize;
        let x1 = ((cx + r_out).ceil() as usize).min(w - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
                // soft 1-px falloff at the rim
                let value = amp * (1.0 - (d - radius).clamp(0.0, 1.0));
                if value > 0.0 {
                    let i = y * w + x;
                    img.data_mut()[i] = (img.data()[i] + value).min(1.0);
                }
            }
        }
    }
    img
}

/// Cell-like structure: a handful of anisotropic Gaussian blobs.
pub fn gen_blobs(h: usize, w: usize, count: usize, rng: &mut ChaCha8Rng) -> Array {
    let mut img = Array::zeros(&[h, w]);
    for _ in 0..count {
        let cy = rng.gen_range(0.1..0.9) * h as f64;
        let cx = rng.gen_range(0.1..0.9) * w as f64;
        let sy = rng.gen_range(0.02..0.10) * h as f64;
        let sx = rng.gen_range(0.02..0.10) * w as f64;
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let amp = rng.gen_range(0.5..1.0);
        let (cos_t, sin_t) = (theta.cos(), theta.sin());
        for y in 0..h {
            for x in 0..w {
                let dy = y as f64 - cy;
                let dx = x as f64 - cx;
                let ry = cos_t * dy - sin_t * dx;
                let rx = sin_t * dy + cos_t * dx;
                let e = (-(ry * ry) / (2.0 * sy * sy) - (rx * rx) / (2.0 * sx * sx)).exp();
                let i = y * w + x;
                img.data_mut()[i] = (img.data()[i] + amp * e).min(1.0);
            }
        }
    }
    img
}

/// Loads a grayscale image as an array in [0, 1].
pub fn load_gray_image(path: &std::path::Path) -> Result<Array> {
    let img = image::open(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read image {}: {e}", path.display())))?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = img.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Array::from_vec(&[h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn constant_image_maps_to_zeros() {
        let img = Array::filled(&[8, 8], 3.7);
        let out = preprocess_gt(&img, 5.0).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalized_image_is_fixed_point() {
        // min 0, max 1, 5th percentile 0: enough zeros at the low end
        let mut data = vec![0.0; 20];
        data.extend((1..=44).map(|i| i as f64 / 44.0));
        let img = Array::from_vec(&[8, 8], data).unwrap();
        let out = preprocess_gt(&img, 5.0).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_clips_below_percentile_and_peaks_at_one() {
        // 256 values 0..255: 5th percentile = 0.05 * 255 = 12.75
        let img = Array::from_fn(&[16, 16], |i| i as f64);
        let out = preprocess_gt(&img, 5.0).unwrap();
        let bg = 12.75;
        let max = 255.0 - bg;
        for (i, &v) in out.data().iter().enumerate() {
            let expect = ((i as f64 - bg).max(0.0)) / max;
            assert!((v - expect).abs() < 1e-12, "pixel {i}");
        }
        assert_eq!(out.data()[255], 1.0);
    }

    #[test]
    fn zero_density_phantom_is_blank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = PhantomConfig {
            density: 0.0,
            ..PhantomConfig::default()
        };
        let img = gen_phantom(64, 64, &cfg, &mut rng);
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn phantom_is_deterministic_and_bounded() {
        let cfg = PhantomConfig::default();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = gen_phantom(64, 64, &cfg, &mut r1);
        let b = gen_phantom(64, 64, &cfg, &mut r2);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(a.sum() > 0.0);
    }
}
