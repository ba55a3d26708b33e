//! Reference PSNR and SSIM, used both for evaluation and inside the training
//! loss. The SSIM here is the standard Gaussian-windowed index (11x11 window,
//! sigma 1.5, K1 = 0.01, K2 = 0.03) averaged over the region where the window
//! fits entirely inside the image.

use ndauto::{kernels, Array, Error, NodeId, Result, Tape};

#[derive(Clone, Copy, Debug)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the inputs (1.0 for normalized images).
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Normalized 2-D Gaussian window; sums to 1.
pub fn gaussian_window(window: usize, sigma: f64) -> Array {
    let half = (window as isize - 1) / 2;
    let mut data = Vec::with_capacity(window * window);
    for y in -half..=half {
        for x in -half..=half {
            data.push((-((y * y + x * x) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = data.iter().sum();
    for v in &mut data {
        *v /= total;
    }
    Array::from_vec(&[window, window], data).expect("window shape")
}

fn window_kernel(channels: usize, cfg: &SsimConfig) -> Array {
    let g = gaussian_window(cfg.window, cfg.sigma);
    let mut data = Vec::with_capacity(channels * cfg.window * cfg.window);
    for _ in 0..channels {
        data.extend_from_slice(g.data());
    }
    Array::from_vec(&[channels, 1, cfg.window, cfg.window], data).expect("kernel shape")
}

pub fn mse(a: &Array, b: &Array) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("mse", format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    let n = a.numel() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB; `+inf` when the inputs are identical.
pub fn psnr(a: &Array, b: &Array, max_val: f64) -> Result<f64> {
    if max_val <= 0.0 {
        return Err(Error::InvalidArgument("psnr: max_val must be positive".into()));
    }
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / e).log10())
}

fn as_chw(a: &Array) -> Result<Array> {
    match a.rank() {
        2 => Array::from_vec(&[1, a.dim(0), a.dim(1)], a.data().to_vec()),
        3 => Ok(a.clone()),
        _ => Err(Error::shape("ssim", "rank 2 or 3", format!("{:?}", a.shape()))),
    }
}

fn check_ssim_inputs(a: &Array, b: &Array, cfg: &SsimConfig) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape("ssim", format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    if a.dim(1) < cfg.window || a.dim(2) < cfg.window {
        return Err(Error::InvalidArgument(format!(
            "ssim: image {}x{} smaller than {}x{} window",
            a.dim(1),
            a.dim(2),
            cfg.window,
            cfg.window
        )));
    }
    Ok(())
}

/// Mean SSIM over valid window positions, averaged over channels.
pub fn ssim(a: &Array, b: &Array, cfg: &SsimConfig) -> Result<f64> {
    let a = as_chw(a)?;
    let b = as_chw(b)?;
    check_ssim_inputs(&a, &b, cfg)?;
    let c = a.dim(0);
    let kernel = window_kernel(c, cfg);
    let filt = |x: &Array| kernels::conv2d_depthwise(x, &kernel);

    let mu_a = filt(&a)?;
    let mu_b = filt(&b)?;
    let aa = a.zip_map(&a, "ssim", |x, y| x * y)?;
    let bb = b.zip_map(&b, "ssim", |x, y| x * y)?;
    let ab = a.zip_map(&b, "ssim", |x, y| x * y)?;
    let var_a = filt(&aa)?.zip_map(&mu_a, "ssim", |m2, m| m2 - m * m)?;
    let var_b = filt(&bb)?.zip_map(&mu_b, "ssim", |m2, m| m2 - m * m)?;
    let cov = {
        let mu_ab = mu_a.zip_map(&mu_b, "ssim", |x, y| x * y)?;
        filt(&ab)?.zip_map(&mu_ab, "ssim", |m2, m| m2 - m)?
    };

    let (c1, c2) = (cfg.c1(), cfg.c2());
    let mut map = mu_a.clone();
    for i in 0..map.numel() {
        let (ma, mb) = (mu_a.data()[i], mu_b.data()[i]);
        let num = (2.0 * ma * mb + c1) * (2.0 * cov.data()[i] + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a.data()[i] + var_b.data()[i] + c2);
        map.data_mut()[i] = num / den;
    }
    let m = cfg.window / 2;
    let valid = kernels::crop_spatial(&map, m, m, a.dim(1) - 2 * m, a.dim(2) - 2 * m)?;
    Ok(valid.sum() / valid.numel() as f64)
}

/// SSIM assembled from tape primitives so it participates in the loss.
/// `a` and `b` must be rank-3 nodes of equal shape.
pub fn ssim_node(tape: &mut Tape, a: NodeId, b: NodeId, cfg: &SsimConfig) -> Result<NodeId> {
    let shape = tape.value(a).shape().to_vec();
    if shape.len() != 3 {
        return Err(Error::shape("ssim_node", "rank 3", format!("{shape:?}")));
    }
    check_ssim_inputs(tape.value(a), tape.value(b), cfg)?;
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let kernel = tape.leaf(window_kernel(c, cfg));

    let mu_a = tape.conv2d_depthwise(a, kernel)?;
    let mu_b = tape.conv2d_depthwise(b, kernel)?;
    let aa = tape.mul(a, a)?;
    let bb = tape.mul(b, b)?;
    let ab = tape.mul(a, b)?;
    let m_aa = tape.conv2d_depthwise(aa, kernel)?;
    let m_bb = tape.conv2d_depthwise(bb, kernel)?;
    let m_ab = tape.conv2d_depthwise(ab, kernel)?;
    let mu_a2 = tape.mul(mu_a, mu_a)?;
    let mu_b2 = tape.mul(mu_b, mu_b)?;
    let mu_ab = tape.mul(mu_a, mu_b)?;
    let var_a = tape.sub(m_aa, mu_a2)?;
    let var_b = tape.sub(m_bb, mu_b2)?;
    let cov = tape.sub(m_ab, mu_ab)?;

    let (c1, c2) = (cfg.c1(), cfg.c2());
    let two_mu = tape.mul_scalar(mu_ab, 2.0);
    let num1 = tape.add_scalar(two_mu, c1);
    let two_cov = tape.mul_scalar(cov, 2.0);
    let num2 = tape.add_scalar(two_cov, c2);
    let num = tape.mul(num1, num2)?;
    let mu_sum = tape.add(mu_a2, mu_b2)?;
    let den1 = tape.add_scalar(mu_sum, c1);
    let var_sum = tape.add(var_a, var_b)?;
    let den2 = tape.add_scalar(var_sum, c2);
    let den = tape.mul(den1, den2)?;
    let map = tape.div(num, den)?;
    let margin = cfg.window / 2;
    let valid = tape.crop_spatial(map, margin, margin, h - 2 * margin, w - 2 * margin)?;
    Ok(tape.mean(valid))
}

/// MSE of high-pass residuals: each input has a small Gaussian blur
/// subtracted first, so only fine structure contributes.
pub fn highpass_mse(a: &Array, b: &Array) -> Result<f64> {
    let a = as_chw(a)?;
    let b = as_chw(b)?;
    if a.shape() != b.shape() {
        return Err(Error::shape("highpass_mse", format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    let cfg = SsimConfig {
        window: 5,
        sigma: 1.0,
        ..SsimConfig::default()
    };
    let kernel = window_kernel(a.dim(0), &cfg);
    let hp = |x: &Array| -> Result<Array> {
        let blur = kernels::conv2d_depthwise(x, &kernel)?;
        x.zip_map(&blur, "highpass", |v, s| v - s)
    };
    mse(&hp(&a)?, &hp(&b)?)
}
