//! Raw compute kernels shared by the tape and by direct (untaped) callers.
//!
//! Convolution follows the true-convolution convention with zero padding and
//! "same" output size:
//!
//!   out[o,y,x] = sum_{i,a,b} K[o,i,a,b] * in[i, y + ch - a, x + cw - b]
//!
//! with `ch = (kh-1)/2`, `cw = (kw-1)/2` and out-of-range input treated as
//! zero. Kernels are expressed as shifted-slice axpys so the inner loops
//! vectorize for any kernel size, including the 1x1 pointwise case.

use crate::array::{Array, Precision};
use crate::error::{Error, Result};

fn quantize_in_place(data: &mut [f64], p: Precision) {
    if p == Precision::Single {
        for v in data {
            *v = *v as f32 as f64;
        }
    }
}

fn finish(shape: &[usize], mut data: Vec<f64>, p: Precision) -> Array {
    quantize_in_place(&mut data, p);
    let mut a = Array::from_vec(shape, data).expect("kernel output shape");
    if p == Precision::Single {
        a = a.with_precision(Precision::Single);
    }
    a
}

/// For a row shift `dy`, the valid output-row range `[y0, y1)` such that
/// `y + dy` stays inside `[0, h)`.
#[inline]
fn shift_range(extent: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = ((extent as isize - shift).max(0) as usize).min(extent);
    (lo.min(hi), hi)
}

/// `out_plane[y, x] += w * in_plane[y + dy, x + dx]` over the valid region.
#[inline]
fn shifted_axpy(out_plane: &mut [f64], in_plane: &[f64], h: usize, w_cols: usize, dy: isize, dx: isize, weight: f64) {
    if weight == 0.0 {
        return;
    }
    let (y0, y1) = shift_range(h, dy);
    let (x0, x1) = shift_range(w_cols, dx);
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let src_row = ((y as isize + dy) as usize) * w_cols;
        let dst_row = y * w_cols;
        let src = &in_plane[src_row + ((x0 as isize + dx) as usize)..src_row + ((x1 as isize + dx) as usize)];
        let dst = &mut out_plane[dst_row + x0..dst_row + x1];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += weight * s;
        }
    }
}

/// Dot product of `a[y, x]` with `b[y + dy, x + dx]` over the valid region.
#[inline]
fn shifted_dot(a_plane: &[f64], b_plane: &[f64], h: usize, w_cols: usize, dy: isize, dx: isize) -> f64 {
    let (y0, y1) = shift_range(h, dy);
    let (x0, x1) = shift_range(w_cols, dx);
    if x0 >= x1 {
        return 0.0;
    }
    let mut acc = 0.0;
    for y in y0..y1 {
        let src_row = ((y as isize + dy) as usize) * w_cols;
        let dst_row = y * w_cols;
        let a = &a_plane[dst_row + x0..dst_row + x1];
        let b = &b_plane[src_row + ((x0 as isize + dx) as usize)..src_row + ((x1 as isize + dx) as usize)];
        for (x, y) in a.iter().zip(b) {
            acc += x * y;
        }
    }
    acc
}

fn check_kernel_dims(kh: usize, kw: usize, context: &str) -> Result<()> {
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "{context}: kernel size must be odd, got {kh}x{kw}"
        )));
    }
    Ok(())
}

/// Multi-channel "same" convolution. Input `C_in x H x W`, kernel
/// `C_out x C_in x kh x kw`, output `C_out x H x W`.
pub fn conv2d_same(input: &Array, kernel: &Array) -> Result<Array> {
    if input.rank() != 3 || kernel.rank() != 4 {
        return Err(Error::shape(
            "conv2d_same",
            "input rank 3, kernel rank 4",
            format!("{:?} / {:?}", input.shape(), kernel.shape()),
        ));
    }
    let (c_in, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let (c_out, kc_in, kh, kw) = (kernel.dim(0), kernel.dim(1), kernel.dim(2), kernel.dim(3));
    if kc_in != c_in {
        return Err(Error::shape(
            "conv2d_same",
            format!("kernel input channels {c_in}"),
            format!("{kc_in}"),
        ));
    }
    check_kernel_dims(kh, kw, "conv2d_same")?;
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut out = vec![0.0; c_out * plane];
    let kd = kernel.data();
    let id = input.data();
    for o in 0..c_out {
        let out_plane = &mut out[o * plane..(o + 1) * plane];
        for i in 0..c_in {
            let in_plane = &id[i * plane..(i + 1) * plane];
            let kbase = (o * c_in + i) * kh * kw;
            for a in 0..kh {
                for b in 0..kw {
                    let weight = kd[kbase + a * kw + b];
                    shifted_axpy(out_plane, in_plane, h, w, ch - a as isize, cw - b as isize, weight);
                }
            }
        }
    }
    Ok(finish(&[c_out, h, w], out, input.precision().promote(kernel.precision())))
}

/// Gradient of `conv2d_same` w.r.t. the input.
pub fn conv2d_same_grad_input(kernel: &Array, grad_out: &Array, c_in: usize, h: usize, w: usize) -> Array {
    let (c_out, kh, kw) = (kernel.dim(0), kernel.dim(2), kernel.dim(3));
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut out = vec![0.0; c_in * plane];
    let kd = kernel.data();
    let gd = grad_out.data();
    for i in 0..c_in {
        let out_plane = &mut out[i * plane..(i + 1) * plane];
        for o in 0..c_out {
            let g_plane = &gd[o * plane..(o + 1) * plane];
            let kbase = (o * c_in + i) * kh * kw;
            for a in 0..kh {
                for b in 0..kw {
                    let weight = kd[kbase + a * kw + b];
                    // d in[p,q] accumulates K[o,i,a,b] * g[p + a - ch, q + b - cw]
                    shifted_axpy(out_plane, g_plane, h, w, a as isize - ch, b as isize - cw, weight);
                }
            }
        }
    }
    finish(&[c_in, h, w], out, Precision::Double)
}

/// Gradient of `conv2d_same` w.r.t. the kernel.
pub fn conv2d_same_grad_kernel(input: &Array, grad_out: &Array, kh: usize, kw: usize) -> Array {
    let (c_in, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let c_out = grad_out.dim(0);
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut out = vec![0.0; c_out * c_in * kh * kw];
    let id = input.data();
    let gd = grad_out.data();
    for o in 0..c_out {
        let g_plane = &gd[o * plane..(o + 1) * plane];
        for i in 0..c_in {
            let in_plane = &id[i * plane..(i + 1) * plane];
            let kbase = (o * c_in + i) * kh * kw;
            for a in 0..kh {
                for b in 0..kw {
                    out[kbase + a * kw + b] =
                        shifted_dot(g_plane, in_plane, h, w, ch - a as isize, cw - b as isize);
                }
            }
        }
    }
    finish(&[c_out, c_in, kh, kw], out, Precision::Double)
}

/// Depthwise "same" convolution. Input `C x H x W`, kernel `C x 1 x kh x kw`.
pub fn conv2d_depthwise(input: &Array, kernel: &Array) -> Result<Array> {
    if input.rank() != 3 || kernel.rank() != 4 || kernel.dim(1) != 1 {
        return Err(Error::shape(
            "conv2d_depthwise",
            "input rank 3, kernel C x 1 x kh x kw",
            format!("{:?} / {:?}", input.shape(), kernel.shape()),
        ));
    }
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    if kernel.dim(0) != c {
        return Err(Error::shape("conv2d_depthwise", format!("{c} kernel channels"), format!("{}", kernel.dim(0))));
    }
    let (kh, kw) = (kernel.dim(2), kernel.dim(3));
    check_kernel_dims(kh, kw, "conv2d_depthwise")?;
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut out = vec![0.0; c * plane];
    let kd = kernel.data();
    let id = input.data();
    for ci in 0..c {
        let out_plane = &mut out[ci * plane..(ci + 1) * plane];
        let in_plane = &id[ci * plane..(ci + 1) * plane];
        let kbase = ci * kh * kw;
        for a in 0..kh {
            for b in 0..kw {
                shifted_axpy(out_plane, in_plane, h, w, ch - a as isize, cw - b as isize, kd[kbase + a * kw + b]);
            }
        }
    }
    Ok(finish(&[c, h, w], out, input.precision().promote(kernel.precision())))
}

pub fn conv2d_depthwise_grad_input(kernel: &Array, grad_out: &Array) -> Array {
    let (c, h, w) = (grad_out.dim(0), grad_out.dim(1), grad_out.dim(2));
    let (kh, kw) = (kernel.dim(2), kernel.dim(3));
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut out = vec![0.0; c * plane];
    let kd = kernel.data();
    let gd = grad_out.data();
    for ci in 0..c {
        let out_plane = &mut out[ci * plane..(ci + 1) * plane];
        let g_plane = &gd[ci * plane..(ci + 1) * plane];
        let kbase = ci * kh * kw;
        for a in 0..kh {
            for b in 0..kw {
                shifted_axpy(out_plane, g_plane, h, w, a as isize - ch, b as isize - cw, kd[kbase + a * kw + b]);
            }
        }
    }
    finish(&[c, h, w], out, Precision::Double)
}

pub fn conv2d_depthwise_grad_kernel(input: &Array, grad_out: &Array, kh: usize, kw: usize) -> Array {
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    let plane = h * w;
    let mut out = vec![0.0; c * kh * kw];
    let id = input.data();
    let gd = grad_out.data();
    for ci in 0..c {
        let g_plane = &gd[ci * plane..(ci + 1) * plane];
        let in_plane = &id[ci * plane..(ci + 1) * plane];
        let kbase = ci * kh * kw;
        for a in 0..kh {
            for b in 0..kw {
                out[kbase + a * kw + b] = shifted_dot(g_plane, in_plane, h, w, ch - a as isize, cw - b as isize);
            }
        }
    }
    finish(&[c, 1, kh, kw], out, Precision::Double)
}

/// Matrix product of `m x k` and `k x n`.
pub fn matmul(a: &Array, b: &Array) -> Result<Array> {
    if a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0) {
        return Err(Error::shape(
            "matmul",
            "(m x k) . (k x n)",
            format!("{:?} . {:?}", a.shape(), b.shape()),
        ));
    }
    let (m, k, n) = (a.dim(0), a.dim(1), b.dim(1));
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data()[i * k + p];
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data()[p * n..(p + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    Ok(finish(&[m, n], out, a.precision().promote(b.precision())))
}

pub fn transpose2(a: &Array) -> Array {
    let (m, n) = (a.dim(0), a.dim(1));
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data()[i * n + j];
        }
    }
    finish(&[n, m], out, a.precision())
}

/// Layer normalization across the channel axis of a `C x H x W` map,
/// independently at each spatial position. Returns `(out, mean, inv_std)`
/// where mean/inv_std are per-pixel and reused by the backward rule.
pub fn layer_norm_channels(input: &Array, gain: &Array, bias: &Array, eps: f64) -> Result<(Array, Vec<f64>, Vec<f64>)> {
    if input.rank() != 3 {
        return Err(Error::shape("layer_norm_channels", "rank 3", format!("{:?}", input.shape())));
    }
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    if gain.shape() != [c] || bias.shape() != [c] {
        return Err(Error::shape(
            "layer_norm_channels",
            format!("gain/bias of shape [{c}]"),
            format!("{:?} / {:?}", gain.shape(), bias.shape()),
        ));
    }
    let plane = h * w;
    let id = input.data();
    let mut out = vec![0.0; c * plane];
    let mut means = vec![0.0; plane];
    let mut inv_stds = vec![0.0; plane];
    for p in 0..plane {
        let mut mean = 0.0;
        for ci in 0..c {
            mean += id[ci * plane + p];
        }
        mean /= c as f64;
        let mut var = 0.0;
        for ci in 0..c {
            let d = id[ci * plane + p] - mean;
            var += d * d;
        }
        var /= c as f64;
        let inv = 1.0 / (var + eps).sqrt();
        means[p] = mean;
        inv_stds[p] = inv;
        for ci in 0..c {
            out[ci * plane + p] = gain.data()[ci] * (id[ci * plane + p] - mean) * inv + bias.data()[ci];
        }
    }
    Ok((finish(&[c, h, w], out, input.precision()), means, inv_stds))
}

/// Backward rule for [`layer_norm_channels`]; returns `(d_input, d_gain, d_bias)`.
pub fn layer_norm_channels_grad(
    input: &Array,
    gain: &Array,
    grad_out: &Array,
    means: &[f64],
    inv_stds: &[f64],
) -> (Array, Array, Array) {
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let plane = h * w;
    let id = input.data();
    let gd = grad_out.data();
    let mut d_in = vec![0.0; c * plane];
    let mut d_gain = vec![0.0; c];
    let mut d_bias = vec![0.0; c];
    let cf = c as f64;
    for p in 0..plane {
        let mean = means[p];
        let inv = inv_stds[p];
        // g = dL/dxhat per channel; two reductions then the standard rule
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for ci in 0..c {
            let xhat = (id[ci * plane + p] - mean) * inv;
            let go = gd[ci * plane + p];
            d_gain[ci] += go * xhat;
            d_bias[ci] += go;
            let g = go * gain.data()[ci];
            sum_g += g;
            sum_gx += g * xhat;
        }
        for ci in 0..c {
            let xhat = (id[ci * plane + p] - mean) * inv;
            let g = gd[ci * plane + p] * gain.data()[ci];
            d_in[ci * plane + p] = inv * (g - sum_g / cf - xhat * sum_gx / cf);
        }
    }
    (
        finish(&[c, h, w], d_in, Precision::Double),
        finish(&[c], d_gain, Precision::Double),
        finish(&[c], d_bias, Precision::Double),
    )
}

/// Global average pool over spatial dims: `C x H x W -> C x 1 x 1`.
pub fn global_avg_pool(input: &Array) -> Result<Array> {
    if input.rank() != 3 {
        return Err(Error::shape("global_avg_pool", "rank 3", format!("{:?}", input.shape())));
    }
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let plane = h * w;
    let mut out = vec![0.0; c];
    for ci in 0..c {
        out[ci] = input.data()[ci * plane..(ci + 1) * plane].iter().sum::<f64>() / plane as f64;
    }
    Ok(finish(&[c, 1, 1], out, input.precision()))
}

pub fn global_avg_pool_grad(grad_out: &Array, h: usize, w: usize) -> Array {
    let c = grad_out.dim(0);
    let plane = h * w;
    let mut out = vec![0.0; c * plane];
    for ci in 0..c {
        let g = grad_out.data()[ci] / plane as f64;
        for v in &mut out[ci * plane..(ci + 1) * plane] {
            *v = g;
        }
    }
    finish(&[c, h, w], out, Precision::Double)
}

/// 2x average-pool downsampling; spatial dims must be even.
pub fn avg_pool2(input: &Array) -> Result<Array> {
    if input.rank() != 3 {
        return Err(Error::shape("avg_pool2", "rank 3", format!("{:?}", input.shape())));
    }
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "avg_pool2 requires even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * oh * ow];
    let id = input.data();
    for ci in 0..c {
        for y in 0..oh {
            let r0 = (ci * h + 2 * y) * w;
            let r1 = r0 + w;
            let orow = (ci * oh + y) * ow;
            for x in 0..ow {
                out[orow + x] = 0.25 * (id[r0 + 2 * x] + id[r0 + 2 * x + 1] + id[r1 + 2 * x] + id[r1 + 2 * x + 1]);
            }
        }
    }
    Ok(finish(&[c, oh, ow], out, input.precision()))
}

pub fn avg_pool2_grad(grad_out: &Array) -> Array {
    let (c, oh, ow) = (grad_out.dim(0), grad_out.dim(1), grad_out.dim(2));
    let (h, w) = (oh * 2, ow * 2);
    let mut out = vec![0.0; c * h * w];
    let gd = grad_out.data();
    for ci in 0..c {
        for y in 0..oh {
            let r0 = (ci * h + 2 * y) * w;
            let r1 = r0 + w;
            let orow = (ci * oh + y) * ow;
            for x in 0..ow {
                let g = 0.25 * gd[orow + x];
                out[r0 + 2 * x] = g;
                out[r0 + 2 * x + 1] = g;
                out[r1 + 2 * x] = g;
                out[r1 + 2 * x + 1] = g;
            }
        }
    }
    finish(&[c, h, w], out, Precision::Double)
}

/// 2x nearest-neighbor upsampling.
pub fn upsample_nearest2(input: &Array) -> Result<Array> {
    if input.rank() != 3 {
        return Err(Error::shape("upsample_nearest2", "rank 3", format!("{:?}", input.shape())));
    }
    let (c, h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let (oh, ow) = (h * 2, w * 2);
    let mut out = vec![0.0; c * oh * ow];
    let id = input.data();
    for ci in 0..c {
        for y in 0..h {
            let irow = (ci * h + y) * w;
            let o0 = (ci * oh + 2 * y) * ow;
            let o1 = o0 + ow;
            for x in 0..w {
                let v = id[irow + x];
                out[o0 + 2 * x] = v;
                out[o0 + 2 * x + 1] = v;
                out[o1 + 2 * x] = v;
                out[o1 + 2 * x + 1] = v;
            }
        }
    }
    Ok(finish(&[c, oh, ow], out, input.precision()))
}

pub fn upsample_nearest2_grad(grad_out: &Array) -> Array {
    let (c, oh, ow) = (grad_out.dim(0), grad_out.dim(1), grad_out.dim(2));
    let (h, w) = (oh / 2, ow / 2);
    let mut out = vec![0.0; c * h * w];
    let gd = grad_out.data();
    for ci in 0..c {
        for y in 0..h {
            let orow = (ci * h + y) * w;
            let g0 = (ci * oh + 2 * y) * ow;
            let g1 = g0 + ow;
            for x in 0..w {
                out[orow + x] = gd[g0 + 2 * x] + gd[g0 + 2 * x + 1] + gd[g1 + 2 * x] + gd[g1 + 2 * x + 1];
            }
        }
    }
    finish(&[c, h, w], out, Precision::Double)
}

pub fn concat_channels(inputs: &[&Array]) -> Result<Array> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("concat_channels: no inputs".into()));
    }
    let (h, w) = (inputs[0].dim(1), inputs[0].dim(2));
    let mut precision = inputs[0].precision();
    let mut c_total = 0;
    for a in inputs {
        if a.rank() != 3 || a.dim(1) != h || a.dim(2) != w {
            return Err(Error::shape(
                "concat_channels",
                format!("spatial {h}x{w}"),
                format!("{:?}", a.shape()),
            ));
        }
        c_total += a.dim(0);
        precision = precision.promote(a.precision());
    }
    let mut out = Vec::with_capacity(c_total * h * w);
    for a in inputs {
        out.extend_from_slice(a.data());
    }
    Ok(finish(&[c_total, h, w], out, precision))
}

pub fn narrow_channels(input: &Array, start: usize, len: usize) -> Result<Array> {
    if input.rank() != 3 || start + len > input.dim(0) {
        return Err(Error::shape(
            "narrow_channels",
            format!("channels [{start}, {}) within {:?}", start + len, input.shape()),
            "out of range".to_string(),
        ));
    }
    let plane = input.dim(1) * input.dim(2);
    let out = input.data()[start * plane..(start + len) * plane].to_vec();
    Ok(finish(&[len, input.dim(1), input.dim(2)], out, input.precision()))
}

pub fn crop_spatial(input: &Array, top: usize, left: usize, height: usize, width: usize) -> Result<Array> {
    if input.rank() != 3 || top + height > input.dim(1) || left + width > input.dim(2) {
        return Err(Error::shape(
            "crop_spatial",
            format!("window {height}x{width}+{top}+{left} within {:?}", input.shape()),
            "out of range".to_string(),
        ));
    }
    let (c, _h, w) = (input.dim(0), input.dim(1), input.dim(2));
    let mut out = Vec::with_capacity(c * height * width);
    for ci in 0..c {
        for y in 0..height {
            let row = (ci * input.dim(1) + top + y) * w + left;
            out.extend_from_slice(&input.data()[row..row + width]);
        }
    }
    Ok(finish(&[c, height, width], out, input.precision()))
}

/// Per-channel scaling of `C x H x W` by `C x 1 x 1`.
pub fn scale_channels(input: &Array, scale: &Array) -> Result<Array> {
    let c = input.dim(0);
    if input.rank() != 3 || scale.shape() != [c, 1, 1] {
        return Err(Error::shape(
            "scale_channels",
            format!("scale [{c}, 1, 1]"),
            format!("{:?}", scale.shape()),
        ));
    }
    let plane = input.dim(1) * input.dim(2);
    let mut out = input.data().to_vec();
    for ci in 0..c {
        let s = scale.data()[ci];
        for v in &mut out[ci * plane..(ci + 1) * plane] {
            *v *= s;
        }
    }
    Ok(finish(input.shape(), out, input.precision().promote(scale.precision())))
}

/// Per-channel bias add: `C x H x W` plus rank-1 `[C]`.
pub fn add_bias_channels(input: &Array, bias: &Array) -> Result<Array> {
    let c = input.dim(0);
    if input.rank() != 3 || bias.shape() != [c] {
        return Err(Error::shape(
            "add_bias_channels",
            format!("bias [{c}]"),
            format!("{:?}", bias.shape()),
        ));
    }
    let plane = input.dim(1) * input.dim(2);
    let mut out = input.data().to_vec();
    for ci in 0..c {
        let b = bias.data()[ci];
        for v in &mut out[ci * plane..(ci + 1) * plane] {
            *v += b;
        }
    }
    Ok(finish(input.shape(), out, input.precision().promote(bias.precision())))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

/// GELU, tanh form. The backward rule differentiates this exact expression.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_conv_is_channel_mix() {
        // 2-channel input, 1x1 kernel summing channels with weights 2 and 3
        let input = Array::from_vec(&[2, 2, 2], vec![1., 2., 3., 4., 10., 20., 30., 40.]).unwrap();
        let kernel = Array::from_vec(&[1, 2, 1, 1], vec![2., 3.]).unwrap();
        let out = conv2d_same(&input, &kernel).unwrap();
        assert_eq!(out.data(), &[32., 64., 96., 128.]);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let input = Array::zeros(&[3, 4, 4]);
        let kernel = Array::zeros(&[1, 2, 3, 3]);
        assert!(conv2d_same(&input, &kernel).is_err());
    }

    #[test]
    fn conv_rejects_even_kernel() {
        let input = Array::zeros(&[1, 4, 4]);
        let kernel = Array::zeros(&[1, 1, 2, 2]);
        assert!(conv2d_same(&input, &kernel).is_err());
    }

    #[test]
    fn avg_pool_rejects_odd_dims() {
        assert!(avg_pool2(&Array::zeros(&[1, 3, 4])).is_err());
    }

    #[test]
    fn pool_then_upsample_shapes() {
        let a = Array::from_fn(&[2, 4, 4], |i| i as f64);
        let p = avg_pool2(&a).unwrap();
        assert_eq!(p.shape(), &[2, 2, 2]);
        let u = upsample_nearest2(&p).unwrap();
        assert_eq!(u.shape(), &[2, 4, 4]);
    }

    #[test]
    fn gelu_grad_matches_fd() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8, "x={x}");
        }
    }
}
