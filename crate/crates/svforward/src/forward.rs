//! The low-rank shift-variant forward model
//!
//!   y = sum_r  h_r * (w_r . x)
//!
//! (object-side weighting), its brute-force per-pixel oracle, the local-PSF
//! probe, and the multi-aperture multiplexing onto a truncated sensor.

use ndauto::{fft_conv2d_same, Array, Error, Result};

use crate::basis::SvBasis;
use crate::geometry::{Geometry, NUM_LENSES};

/// One lens's image before multiplexing. Linear in `x`.
pub fn sv_forward(x: &Array, basis: &SvBasis) -> Result<Array> {
    let (h, w) = basis.object_shape();
    if x.shape() != [h, w] {
        return Err(Error::shape("sv_forward", format!("[{h}, {w}]"), format!("{:?}", x.shape())));
    }
    let mut out = Array::zeros(&[h, w]);
    for (kernel, map) in basis.kernels.iter().zip(&basis.coeff_maps) {
        let weighted = x.zip_map(map, "sv_forward", |xv, wv| xv * wv)?;
        let conv = fft_conv2d_same(&weighted, kernel)?;
        for (o, c) in out.data_mut().iter_mut().zip(conv.data()) {
            *o += c;
        }
    }
    Ok(out)
}

/// Independent oracle: y(s) = sum_t x(t) PSF_t(s) with
/// PSF_t(s) = sum_r w_r(t) h_r(s - t), evaluated by explicit nested loops
/// with zero padding. O(N^2 k^2 R); keep inputs small.
pub fn sv_forward_bruteforce(x: &Array, basis: &SvBasis) -> Result<Array> {
    let (h, w) = basis.object_shape();
    if x.shape() != [h, w] {
        return Err(Error::shape(
            "sv_forward_bruteforce",
            format!("[{h}, {w}]"),
            format!("{:?}", x.shape()),
        ));
    }
    let k = basis.kernel_size();
    let half = (k / 2) as isize;
    let mut out = Array::zeros(&[h, w]);
    for ty in 0..h {
        for tx in 0..w {
            let xv = x.at2(ty, tx);
            if xv == 0.0 {
                continue;
            }
            for (kernel, map) in basis.kernels.iter().zip(&basis.coeff_maps) {
                let weight = xv * map.at2(ty, tx);
                if weight == 0.0 {
                    continue;
                }
                for ky in 0..k {
                    for kx in 0..k {
                        let sy = ty as isize + ky as isize - half;
                        let sx = tx as isize + kx as isize - half;
                        if sy >= 0 && (sy as usize) < h && sx >= 0 && (sx as usize) < w {
                            let i = sy as usize * w + sx as usize;
                            out.data_mut()[i] += weight * kernel.at2(ky, kx);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Local PSF at object pixel `t`: sum_r w_r(t) h_r, as a k x k kernel.
pub fn reconstruct_local_psf(basis: &SvBasis, t: (usize, usize)) -> Result<Array> {
    let (h, w) = basis.object_shape();
    if t.0 >= h || t.1 >= w {
        return Err(Error::InvalidArgument(format!(
            "pixel {t:?} outside {h}x{w} object"
        )));
    }
    let k = basis.kernel_size();
    let mut out = Array::zeros(&[k, k]);
    for (kernel, map) in basis.kernels.iter().zip(&basis.coeff_maps) {
        let wt = map.at2(t.0, t.1);
        for (o, kv) in out.data_mut().iter_mut().zip(kernel.data()) {
            *o += wt * kv;
        }
    }
    Ok(out)
}

/// Second moment (trace of the covariance) of a nonnegative kernel; a
/// scale diagnostic for local PSFs.
pub fn second_moment(kernel: &Array) -> f64 {
    let (h, w) = (kernel.dim(0), kernel.dim(1));
    let total = kernel.sum();
    if total <= 0.0 {
        return 0.0;
    }
    let (mut my, mut mx) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            my += y as f64 * kernel.at2(y, x);
            mx += x as f64 * kernel.at2(y, x);
        }
    }
    my /= total;
    mx /= total;
    let mut m2 = 0.0;
    for y in 0..h {
        for x in 0..w {
            let dy = y as f64 - my;
            let dx = x as f64 - mx;
            m2 += (dy * dy + dx * dx) * kernel.at2(y, x);
        }
    }
    m2 / total
}

/// Translates each lens image so its center sits on the lens's chief ray,
/// sums everything on the padded canvas, and crops the centered sensor
/// window (truncation).
pub fn multiplex(lens_images: &[Array], geometry: &Geometry) -> Result<Array> {
    if lens_images.len() != NUM_LENSES {
        return Err(Error::InvalidArgument(format!(
            "multiplex expects {NUM_LENSES} lens images, got {}",
            lens_images.len()
        )));
    }
    let shape = lens_images[0].shape().to_vec();
    for img in lens_images {
        if img.shape() != shape.as_slice() {
            return Err(Error::shape("multiplex", format!("{shape:?}"), format!("{:?}", img.shape())));
        }
    }
    let (ih, iw) = (shape[0], shape[1]);
    let (ph, pw) = geometry.pad;
    let mut canvas = Array::zeros(&[ph, pw]);
    for (lens, img) in lens_images.iter().enumerate() {
        let (ry, rx) = geometry.chief_rays[lens];
        let top = ry as isize - ih as isize / 2;
        let left = rx as isize - iw as isize / 2;
        if top + ih as isize <= 0 || left + iw as isize <= 0 || top >= ph as isize || left >= pw as isize {
            return Err(Error::InvalidArgument(format!(
                "lens {lens} image placed fully off the padded canvas (top {top}, left {left})"
            )));
        }
        let y0 = (-top).max(0) as usize;
        let y1 = ((ph as isize - top).min(ih as isize)) as usize;
        let x0 = (-left).max(0) as usize;
        let x1 = ((pw as isize - left).min(iw as isize)) as usize;
        for y in y0..y1 {
            let cy = (y as isize + top) as usize;
            let crow = cy * pw;
            let irow = y * iw;
            let dst = &mut canvas.data_mut()[crow + (x0 as isize + left) as usize..crow + (x1 as isize + left) as usize];
            let src = &img.data()[irow + x0..irow + x1];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    // sensor truncation: values outside the centered window are discarded
    let (oy, ox) = geometry.pad_offset();
    let (sh, sw) = geometry.sensor;
    let mut sensor = Array::zeros(&[sh, sw]);
    for y in 0..sh {
        let crow = (y + oy) * pw + ox;
        let srow = y * sw;
        sensor.data_mut()[srow..srow + sw].copy_from_slice(&canvas.data()[crow..crow + sw]);
    }
    Ok(sensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{synth_basis, BasisConfig};
    use crate::geometry::grid_chief_rays;

    fn small_geometry(n: usize) -> Geometry {
        Geometry::new_relaxed(
            (n, n),
            (n, n),
            grid_chief_rays((n, n), n / 4),
            (n, n),
            n.min(16),
            n.min(16),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_object_gives_zero_image() {
        let g = small_geometry(32);
        let basis = &synth_basis(&g, &BasisConfig::default(), 1).unwrap()[0];
        let y = sv_forward(&Array::zeros(&[32, 32]), basis).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_equals_local_psf() {
        let g = small_geometry(32);
        let basis = &synth_basis(&g, &BasisConfig::default(), 2).unwrap()[3];
        let t = (16usize, 13usize);
        let mut x = Array::zeros(&[32, 32]);
        x.set2(t.0, t.1, 1.0);
        let y = sv_forward(&x, basis).unwrap();
        let psf = reconstruct_local_psf(basis, t).unwrap();
        let k = basis.kernel_size();
        let half = (k / 2) as isize;
        for sy in 0..32isize {
            for sx in 0..32isize {
                let ky = sy - t.0 as isize + half;
                let kx = sx - t.1 as isize + half;
                let expect = if ky >= 0 && ky < k as isize && kx >= 0 && kx < k as isize {
                    psf.at2(ky as usize, kx as usize)
                } else {
                    0.0
                };
                assert!(
                    (y.at2(sy as usize, sx as usize) - expect).abs() < 1e-12,
                    "pixel ({sy},{sx})"
                );
            }
        }
    }

    #[test]
    fn local_psf_edge_cases() {
        let g = small_geometry(32);
        // R=1 with unit maps: local PSF is the kernel itself
        let cfg = BasisConfig {
            rank: 1,
            constant_coeffs: true,
            ..BasisConfig::default()
        };
        let basis = &synth_basis(&g, &cfg, 3).unwrap()[0];
        let psf = reconstruct_local_psf(basis, (5, 5)).unwrap();
        assert_eq!(psf, basis.kernels[0]);

        assert!(reconstruct_local_psf(basis, (32, 0)).is_err());

        // all-zero coefficients at a pixel give a zero kernel
        let mut zeroed = basis.clone();
        zeroed.coeff_maps[0].set2(4, 4, 0.0);
        let z = reconstruct_local_psf(&zeroed, (4, 4)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn multiplex_single_centered_lens_is_identity() {
        // sensor == pad == sub-view with one nonzero lens centered
        let n = 24;
        let rays = [(n / 2, n / 2); 9];
        let g = Geometry::new_relaxed((n, n), (n, n), rays, (n, n), 16, 16, 1.0).unwrap();
        let img = Array::from_fn(&[n, n], |i| i as f64);
        let mut images = vec![Array::zeros(&[n, n]); 9];
        images[4] = img.clone();
        let sensor = multiplex(&images, &g).unwrap();
        assert_eq!(sensor, img);
    }

    #[test]
    fn multiplex_overlap_adds() {
        let n = 24;
        let rays = [(n / 2, n / 2); 9];
        let g = Geometry::new_relaxed((n, n), (n, n), rays, (n, n), 16, 16, 1.0).unwrap();
        let c = 0.7;
        let mut images = vec![Array::zeros(&[n, n]); 9];
        images[0] = Array::filled(&[n, n], c);
        images[8] = Array::filled(&[n, n], c);
        let sensor = multiplex(&images, &g).unwrap();
        assert!(sensor.data().iter().all(|&v| (v - 2.0 * c).abs() < 1e-15));
    }

    #[test]
    fn multiplex_rejects_fully_off_canvas() {
        let mut rays = [(12usize, 12usize); 9];
        rays[0] = (2000, 2000);
        let g = Geometry::new_relaxed((24, 24), (24, 24), rays, (24, 24), 16, 16, 1.0).unwrap();
        let images = vec![Array::filled(&[24, 24], 1.0); 9];
        assert!(multiplex(&images, &g).is_err());
    }
}
