//! Complex filtering followed by the squared modulus.
//!
//! Each channel's complex kernel is realized as a pair of real kernels
//! (cosine/sine for Gabor, adjacent rows for the convolutional bank) whose
//! outputs are squared and summed. Correlations are evaluated with one
//! zero-padded FFT per channel; the padding length `L ≥ T + (W−1)/2` keeps
//! circular wrap-around out of the `T` retained outputs.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{smooth_len, FftPair};
use crate::gabor::GaborBank;
use crate::signal::{Waveform, FRONTEND_RATE};

/// Unconstrained convolutional filterbank, `2N` real kernels of length `W`.
/// Kernels `2n` and `2n+1` act as the real and imaginary parts of channel `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    pub kernels: Vec<Vec<f64>>,
}

impl ConvBank {
    /// Initialize from the cosine/sine parts of a Gabor bank, ℓ2-normalized.
    pub fn from_gabor(bank: &GaborBank) -> Result<Self> {
        let mut kernels = Vec::with_capacity(2 * bank.n_filters());
        for n in 0..bank.n_filters() {
            let (re, im) = bank.real_imag(n);
            kernels.push(re);
            kernels.push(im);
        }
        renormalize_conv(&ConvBank { kernels })
    }

    pub fn n_filters(&self) -> usize {
        self.kernels.len() / 2
    }

    pub fn filter_len(&self) -> usize {
        self.kernels.first().map_or(0, Vec::len)
    }

    pub(crate) fn complex_kernel(&self, n: usize) -> Vec<Complex64> {
        self.kernels[2 * n]
            .iter()
            .zip(&self.kernels[2 * n + 1])
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }
}

/// Divide every kernel by its ℓ2 norm.
pub fn renormalize_conv(bank: &ConvBank) -> Result<ConvBank> {
    let kernels = bank
        .kernels
        .iter()
        .enumerate()
        .map(|(index, k)| {
            let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroFilter { index });
            }
            Ok(k.iter().map(|v| v / norm).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvBank { kernels })
}

#[derive(Debug, Clone, Copy)]
pub enum FilterBankRef<'a> {
    Gabor(&'a GaborBank),
    Conv(&'a ConvBank),
}

impl FilterBankRef<'_> {
    pub(crate) fn complex_kernels(&self) -> Vec<Vec<Complex64>> {
        match self {
            FilterBankRef::Gabor(b) => (0..b.n_filters()).map(|n| b.impulse_response(n)).collect(),
            FilterBankRef::Conv(b) => (0..b.n_filters()).map(|n| b.complex_kernel(n)).collect(),
        }
    }
}

/// `f_n(t) = (x ⋆ re_n)(t)² + (x ⋆ im_n)(t)²` with "same" zero padding.
/// Returns one vector of `T` samples per channel.
pub fn filter_squared_modulus(x: &Waveform, bank: FilterBankRef<'_>) -> Result<Vec<Vec<f64>>> {
    x.require_rate(FRONTEND_RATE)?;
    if let FilterBankRef::Conv(b) = bank {
        if b.kernels.len() % 2 != 0 || b.kernels.iter().any(|k| k.len() % 2 == 0 || k.len() != b.filter_len()) {
            return Err(Error::ShapeMismatch {
                name: "conv_kernels".into(),
                detail: "need an even number of equal, odd-length kernels".into(),
            });
        }
    }
    let plan = FilterPlan::new(&bank.complex_kernels(), x.len());
    let out = plan.forward(x.samples());
    Ok(out.squared_modulus())
}

/// Kernel spectra prepared for clips of one length.
pub(crate) struct FilterPlan {
    fft: FftPair,
    t_len: usize,
    filter_len: usize,
    /// Already divided by the transform length.
    spectra: Vec<Vec<Complex64>>,
}

/// Complex filter outputs kept for the backward pass.
pub(crate) struct FilterOutput {
    x_spectrum: Vec<Complex64>,
    pub(crate) responses: Vec<Vec<Complex64>>,
}

impl FilterOutput {
    pub(crate) fn squared_modulus(&self) -> Vec<Vec<f64>> {
        self.responses
            .iter()
            .map(|y| y.iter().map(|c| c.norm_sqr()).collect())
            .collect()
    }
}

impl FilterPlan {
    pub(crate) fn new(kernels: &[Vec<Complex64>], t_len: usize) -> Self {
        let filter_len = kernels.first().map_or(1, Vec::len);
        let half = (filter_len - 1) / 2;
        let fft = FftPair::new(smooth_len(t_len + half));
        let l = fft.len();
        let scale = 1.0 / l as f64;
        let spectra = kernels
            .iter()
            .map(|k| {
                // g[m mod L] = k[half − m] turns circular convolution into
                // the centered cross-correlation.
                let mut g = vec![Complex64::new(0.0, 0.0); l];
                for (j, &kv) in k.iter().enumerate() {
                    let m = half as isize - j as isize;
                    g[m.rem_euclid(l as isize) as usize] = kv * scale;
                }
                fft.forward(&mut g);
                g
            })
            .collect();
        FilterPlan {
            fft,
            t_len,
            filter_len,
            spectra,
        }
    }

    pub(crate) fn forward(&self, x: &[f64]) -> FilterOutput {
        debug_assert_eq!(x.len(), self.t_len);
        let x_spectrum = self.fft.forward_real(x);
        let responses = self
            .spectra
            .iter()
            .map(|g| {
                let mut y: Vec<Complex64> = x_spectrum.iter().zip(g).map(|(a, b)| a * b).collect();
                self.fft.inverse_unscaled(&mut y);
                y.truncate(self.t_len);
                y
            })
            .collect();
        FilterOutput { x_spectrum, responses }
    }

    /// Unscaled spectra `R_n` of the kernel-tap gradients given
    /// `∂loss/∂f_n(t)`. They are linear in the loss, so spectra of several
    /// clips may be summed before [`FilterPlan::kernel_grads`].
    pub(crate) fn backward_spectra(&self, out: &FilterOutput, grad_f: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
        let l = self.fft.len();
        let x = &out.x_spectrum;
        out.responses
            .iter()
            .zip(grad_f)
            .map(|(y, gf)| {
                let mut a = vec![Complex64::new(0.0, 0.0); l];
                for ((av, yv), &g) in a.iter_mut().zip(y).zip(gf) {
                    *av = yv * (2.0 * g);
                }
                self.fft.forward(&mut a);
                // r[m] = Σ_t a[t]·x[t+m]  ⇔  R[k] = A[−k]·X[k]
                let mut r = Vec::with_capacity(l);
                r.push(a[0] * x[0]);
                r.extend(a[1..].iter().rev().zip(&x[1..]).map(|(av, xv)| av * xv));
                r
            })
            .collect()
    }

    /// Gradient of the loss with respect to each complex kernel tap
    /// (`∂/∂re + i·∂/∂im`) from (summed) [`FilterPlan::backward_spectra`].
    pub(crate) fn kernel_grads(&self, spectra: Vec<Vec<Complex64>>) -> Vec<Vec<Complex64>> {
        let l = self.fft.len();
        let half = (self.filter_len - 1) / 2;
        let scale = 1.0 / l as f64;
        spectra
            .into_iter()
            .map(|mut r| {
                self.fft.inverse_unscaled(&mut r);
                (0..self.filter_len)
                    .map(|j| {
                        let m = j as isize - half as isize;
                        r[m.rem_euclid(l as isize) as usize] * scale
                    })
                    .collect()
            })
            .collect()
    }
}

/// Chain kernel-tap gradients through the Gabor parametrization.
pub(crate) fn gabor_param_grads(bank: &GaborBank, kernel_grads: &[Vec<Complex64>]) -> (Vec<f64>, Vec<f64>) {
    let half = bank.half_len() as isize;
    let norm0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut d_eta = Vec::with_capacity(bank.n_filters());
    let mut d_sigma = Vec::with_capacity(bank.n_filters());
    for (n, dk) in kernel_grads.iter().enumerate() {
        let eta = bank.center_freqs[n];
        let sigma = bank.inv_bandwidths[n];
        let (mut ge, mut gs) = (0.0, 0.0);
        for (j, g) in dk.iter().enumerate() {
            let t = (j as isize - half) as f64;
            let env = norm0 / sigma * (-t * t / (2.0 * sigma * sigma)).exp();
            let denv = env * (t * t / (sigma * sigma * sigma) - 1.0 / sigma);
            let phase = std::f64::consts::TAU * eta * t;
            let (s, c) = phase.sin_cos();
            let w = std::f64::consts::TAU * t;
            // re = c·env, im = s·env
            ge += g.re * (-w * s * env) + g.im * (w * c * env);
            gs += g.re * (c * denv) + g.im * (s * denv);
        }
        d_eta.push(ge);
        d_sigma.push(gs);
    }
    (d_eta, d_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::gabor_kernel;

    fn direct(x: &[f64], k: &[Complex64]) -> Vec<f64> {
        let half = (k.len() - 1) / 2;
        (0..x.len())
            .map(|t| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, kv) in k.iter().enumerate() {
                    let idx = t as isize + j as isize - half as isize;
                    if idx >= 0 && (idx as usize) < x.len() {
                        acc += kv * x[idx as usize];
                    }
                }
                acc.norm_sqr()
            })
            .collect()
    }

    #[test]
    fn matches_direct_correlation() {
        let x: Vec<f64> = (0..300).map(|i| (i * 37 % 101) as f64 / 50.0 - 1.0).collect();
        let bank = GaborBank::new(vec![0.03, 0.21], vec![6.0, 15.0], 41).unwrap();
        let w = Waveform::new(x.clone(), 16000).unwrap();
        let f = filter_squared_modulus(&w, FilterBankRef::Gabor(&bank)).unwrap();
        for n in 0..2 {
            let d = direct(&x, &bank.impulse_response(n));
            for (a, b) in f[n].iter().zip(&d) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn impulse_traces_envelope() {
        let mut x = vec![0.0; 2001];
        x[1000] = 1.0;
        let w = Waveform::new(x, 16000).unwrap();
        let bank = GaborBank::new(vec![0.1, 0.37], vec![30.0, 30.0], 401).unwrap();
        let f = filter_squared_modulus(&w, FilterBankRef::Gabor(&bank)).unwrap();
        let sigma: f64 = 30.0;
        for ch in &f {
            for dt in -200i32..=200 {
                let t = (1000 + dt) as usize;
                let want = (-(dt as f64).powi(2) / sigma.powi(2)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma);
                assert!((ch[t] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let w = Waveform::new(vec![0.0; 500], 16000).unwrap();
        let bank = GaborBank::new(vec![0.1], vec![10.0], 51).unwrap();
        let f = filter_squared_modulus(&w, FilterBankRef::Gabor(&bank)).unwrap();
        assert!(f[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_rate_rejected() {
        let w = Waveform::new(vec![0.0; 500], 8000).unwrap();
        let bank = GaborBank::new(vec![0.1], vec![10.0], 51).unwrap();
        assert!(matches!(
            filter_squared_modulus(&w, FilterBankRef::Gabor(&bank)),
            Err(Error::BadRate { got: 8000, .. })
        ));
    }

    #[test]
    fn renormalize_examples() {
        let b = renormalize_conv(&ConvBank {
            kernels: vec![vec![3.0, 0.0, 4.0], vec![0.0, 2.0, 0.0]],
        })
        .unwrap();
        assert_eq!(b.kernels[0], vec![0.6, 0.0, 0.8]);
        let again = renormalize_conv(&b).unwrap();
        for (a, c) in again.kernels.concat().iter().zip(b.kernels.concat()) {
            assert!((a - c).abs() < 1e-12);
        }
        assert!(matches!(
            renormalize_conv(&ConvBank {
                kernels: vec![vec![0.0; 3], vec![1.0; 3]]
            }),
            Err(Error::ZeroFilter { index: 0 })
        ));
    }

    #[test]
    fn output_invariant_to_kernel_scale_after_renormalizing() {
        let gb = GaborBank::new(vec![0.12], vec![9.0], 31).unwrap();
        let base = ConvBank::from_gabor(&gb).unwrap();
        let mut scaled = base.clone();
        for v in scaled.kernels[0].iter_mut() {
            *v *= 10.0;
        }
        let scaled = renormalize_conv(&scaled).unwrap();
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.3).sin()).collect();
        let w = Waveform::new(x, 16000).unwrap();
        let a = filter_squared_modulus(&w, FilterBankRef::Conv(&base)).unwrap();
        let b = filter_squared_modulus(&w, FilterBankRef::Conv(&scaled)).unwrap();
        for (u, v) in a[0].iter().zip(&b[0]) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1e-12));
        }
    }

    #[test]
    fn tone_envelope_matches_single_step_oracle() {
        // cos(2π·0.25·t) through a matched channel: the interior output is the
        // constant squared Hilbert envelope.
        let t_len = 3000;
        let x: Vec<f64> = (0..t_len)
            .map(|t| (std::f64::consts::TAU * 0.25 * t as f64).cos())
            .collect();
        let k = gabor_kernel(0.25, 40.0, 401);
        let w = Waveform::new(x.clone(), 16000).unwrap();
        let bank = GaborBank::new(vec![0.25], vec![40.0], 401).unwrap();
        let f = filter_squared_modulus(&w, FilterBankRef::Gabor(&bank)).unwrap();
        let interior = &f[0][401..t_len - 401];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        let (lo, hi) = interior
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((hi - lo) / mean < 0.02);
        let t0 = 1500;
        let oracle = direct(&x[t0 - 200..t0 + 201], &k)[200];
        assert!((f[0][t0] - oracle).abs() / oracle < 1e-10);
    }
}
