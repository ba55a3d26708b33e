//! FFT-backed "same" convolution for large kernels, equivalent to
//! [`crate::kernels::conv2d_same`] on single-channel inputs.

use crate::array::Array;
use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn fft2(data: &mut [Complex<f64>], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(cols)
    } else {
        planner.plan_fft_forward(cols)
    };
    for r in 0..rows {
        row_fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(rows)
    } else {
        planner.plan_fft_forward(rows)
    };
    let mut col = vec![Complex::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// True convolution with zero padding and same-size output, computed in the
/// frequency domain. Input `H x W`, kernel `kh x kw` (odd, no larger than the
/// input).
pub fn fft_conv2d_same(input: &Array, kernel: &Array) -> Result<Array> {
    if input.rank() != 2 || kernel.rank() != 2 {
        return Err(Error::shape(
            "fft_conv2d_same",
            "rank-2 input and kernel",
            format!("{:?} / {:?}", input.shape(), kernel.shape()),
        ));
    }
    let (h, w) = (input.dim(0), input.dim(1));
    let (kh, kw) = (kernel.dim(0), kernel.dim(1));
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "fft_conv2d_same: kernel size must be odd, got {kh}x{kw}"
        )));
    }
    if kh > h || kw > w {
        return Err(Error::InvalidArgument(format!(
            "fft_conv2d_same: kernel {kh}x{kw} larger than padded input {h}x{w}"
        )));
    }
    // Linear convolution size; the full result is cropped back to "same".
    let fh = h + kh - 1;
    let fw = w + kw - 1;
    let mut fa = vec![Complex::new(0.0, 0.0); fh * fw];
    let mut fb = vec![Complex::new(0.0, 0.0); fh * fw];
    for y in 0..h {
        for x in 0..w {
            fa[y * fw + x] = Complex::new(input.at2(y, x), 0.0);
        }
    }
    for y in 0..kh {
        for x in 0..kw {
            fb[y * fw + x] = Complex::new(kernel.at2(y, x), 0.0);
        }
    }
    fft2(&mut fa, fh, fw, false);
    fft2(&mut fb, fh, fw, false);
    for (a, b) in fa.iter_mut().zip(&fb) {
        *a *= *b;
    }
    fft2(&mut fa, fh, fw, true);
    let norm = 1.0 / (fh * fw) as f64;
    let (ch, cw) = (kh / 2, kw / 2);
    let precision = input.precision().promote(kernel.precision());
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(fa[(y + ch) * fw + (x + cw)].re * norm);
        }
    }
    Array::from_vec_prec(&[h, w], out, precision)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_kernel_is_identity() {
        let input = Array::from_fn(&[8, 7], |i| (i as f64).sin());
        let mut kernel = Array::zeros(&[3, 3]);
        kernel.set2(1, 1, 1.0);
        let out = fft_conv2d_same(&input, &kernel).unwrap();
        for (a, b) in out.data().iter().zip(input.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_kernel_rejected() {
        let input = Array::zeros(&[4, 4]);
        let kernel = Array::zeros(&[5, 5]);
        assert!(fft_conv2d_same(&input, &kernel).is_err());
    }
}
