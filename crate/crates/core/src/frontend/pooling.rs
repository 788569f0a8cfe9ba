//! Depthwise Gaussian lowpass pooling with per-channel widths.

use crate::error::{Error, Result};
use crate::frontend::{FeatureMap, FrontendConfig};

/// Width fractions `w_n`; the kernel standard deviation is
/// `w_n·(pool_len − 1)/2` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolingParams {
    pub widths: Vec<f64>,
}

impl PoolingParams {
    pub const INIT_WIDTH: f64 = 0.4;

    pub fn init(n_filters: usize) -> Self {
        PoolingParams {
            widths: vec![Self::INIT_WIDTH; n_filters],
        }
    }

    pub fn bounds(pool_len: usize) -> (f64, f64) {
        (2.0 / pool_len as f64, 0.5)
    }

    pub fn project(&self, pool_len: usize) -> Self {
        let (lo, hi) = Self::bounds(pool_len);
        PoolingParams {
            widths: self
                .widths
                .iter()
                .map(|&w| if w.is_nan() { lo } else { w.clamp(lo, hi) })
                .collect(),
        }
    }
}

fn kernel_sigma(w: f64, pool_len: usize) -> f64 {
    w * (pool_len as f64 - 1.0) / 2.0
}

/// Normalized Gaussian on `t = −(L−1)/2 … (L−1)/2`.
pub fn gaussian_lowpass_kernel(w: f64, pool_len: usize) -> Vec<f64> {
    let sigma = kernel_sigma(w, pool_len);
    let half = (pool_len as isize - 1) / 2;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    (-half..=half)
        .map(|t| {
            let t = t as f64;
            norm * (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// `∂kernel/∂w`.
fn kernel_width_derivative(w: f64, pool_len: usize) -> Vec<f64> {
    let sigma = kernel_sigma(w, pool_len);
    let dsigma_dw = (pool_len as f64 - 1.0) / 2.0;
    let half = (pool_len as isize - 1) / 2;
    gaussian_lowpass_kernel(w, pool_len)
        .into_iter()
        .zip(-half..=half)
        .map(|(k, t)| {
            let t = t as f64;
            k * (t * t / (sigma * sigma * sigma) - 1.0 / sigma) * dsigma_dw
        })
        .collect()
}

/// Filter each channel with its own Gaussian and keep every
/// `pool_stride`-th output starting at index 0.
pub fn pool_decimate(f: &[Vec<f64>], pool: &PoolingParams, cfg: &FrontendConfig) -> Result<FeatureMap> {
    if f.len() != pool.widths.len() {
        return Err(Error::ShapeMismatch {
            name: "pool_widths".into(),
            detail: format!("{} widths for {} channels", pool.widths.len(), f.len()),
        });
    }
    let plan = PoolPlan::new(pool, cfg.pool_len, cfg.pool_stride, false);
    let pooled: Vec<Vec<f64>> = f.iter().enumerate().map(|(n, x)| plan.forward(n, x)).collect();
    Ok(FeatureMap::from_channels(&pooled, cfg.frame_rate()))
}

/// Kernels (and optionally their width derivatives) for one set of widths.
pub(crate) struct PoolPlan {
    stride: usize,
    kernels: Vec<Vec<f64>>,
    width_derivs: Vec<Vec<f64>>,
}

impl PoolPlan {
    pub(crate) fn new(pool: &PoolingParams, pool_len: usize, stride: usize, with_derivs: bool) -> Self {
        PoolPlan {
            stride,
            kernels: pool
                .widths
                .iter()
                .map(|&w| gaussian_lowpass_kernel(w, pool_len))
                .collect(),
            width_derivs: if with_derivs {
                pool.widths
                    .iter()
                    .map(|&w| kernel_width_derivative(w, pool_len))
                    .collect()
            } else {
                Vec::new()
            },
        }
    }

    pub(crate) fn forward(&self, n: usize, x: &[f64]) -> Vec<f64> {
        let k = &self.kernels[n];
        let half = (k.len() - 1) / 2;
        let frames = x.len().div_ceil(self.stride);
        (0..frames)
            .map(|m| {
                let center = m * self.stride;
                let (j0, j1, start) = valid_taps(center, half, k.len(), x.len());
                dot(&k[j0..j1], &x[start..start + (j1 - j0)])
            })
            .collect()
    }

    /// Returns `(∂loss/∂x, ∂loss/∂w_n)` for channel `n`.
    pub(crate) fn backward(&self, n: usize, x: &[f64], grad_out: &[f64]) -> (Vec<f64>, f64) {
        let k = &self.kernels[n];
        let dk = &self.width_derivs[n];
        let half = (k.len() - 1) / 2;
        let mut gx = vec![0.0; x.len()];
        let mut gw = 0.0;
        for (m, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let (j0, j1, start) = valid_taps(m * self.stride, half, k.len(), x.len());
            let span = j1 - j0;
            for (o, kv) in gx[start..start + span].iter_mut().zip(&k[j0..j1]) {
                *o += g * kv;
            }
            gw += g * dot(&dk[j0..j1], &x[start..start + span]);
        }
        (gx, gw)
    }
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Kernel tap range `[j0, j1)` overlapping the signal for an output
/// centered at `center`, and the signal index aligned with tap `j0`.
fn valid_taps(center: usize, half: usize, k_len: usize, x_len: usize) -> (usize, usize, usize) {
    let j0 = half.saturating_sub(center);
    let j1 = k_len.min(x_len + half - center);
    let start = center + j0 - half;
    (j0, j1, start)
}
