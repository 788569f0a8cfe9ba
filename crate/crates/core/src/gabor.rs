//! Gabor filterbank: mel-scale initialization, impulse responses, range
//! constraints and frequency-response analysis.
//!
//! Center frequencies are in cycles/sample (normalized to the sample rate),
//! inverse bandwidths are Gaussian standard deviations in samples. A filter
//! with width `σ` has a frequency-domain FWHM of `2·sqrt(2 ln 2)/σ` in
//! radians/sample, which is how bandwidths are measured throughout.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPair;

/// `2·sqrt(2·ln 2)`, the FWHM of a unit-variance Gaussian.
pub fn fwhm_factor() -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Design grid for the mel triangles used both by the mel baseline and to
/// initialize the Gabor bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelInitConfig {
    pub n_filters: usize,
    pub sample_rate: u32,
    pub fmin: f64,
    pub fmax: f64,
    pub n_fft: usize,
}

impl Default for MelInitConfig {
    fn default() -> Self {
        MelInitConfig {
            n_filters: 40,
            sample_rate: 16_000,
            fmin: 60.0,
            fmax: 7800.0,
            n_fft: 512,
        }
    }
}

impl MelInitConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.n_filters == 0 {
            return Err(Error::InvalidConfig("n_filters must be at least 1".into()));
        }
        if !(0.0 <= self.fmin && self.fmin < self.fmax && self.fmax <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin={} fmax={}",
                self.fmin, self.fmax
            )));
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Breakpoint frequencies in Hz, `n_filters + 2` of them, equally spaced
    /// in mel.
    pub fn breakpoints_hz(&self) -> Vec<f64> {
        let lo = hz_to_mel(self.fmin);
        let hi = hz_to_mel(self.fmax);
        let n = self.n_filters + 1;
        (0..=n)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64))
            .collect()
    }
}

/// Triangular mel filters on the FFT-bin grid, `n_filters × (n_fft/2 + 1)`,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelMatrix {
    n_filters: usize,
    n_bins: usize,
    n_fft: usize,
    data: Vec<f64>,
}

impl MelMatrix {
    /// Build from explicit rows (each of length `n_fft/2 + 1`).
    pub fn from_rows(rows: Vec<Vec<f64>>, n_fft: usize) -> Result<Self> {
        let n_bins = n_fft / 2 + 1;
        if rows.is_empty() || rows.iter().any(|r| r.len() != n_bins) {
            return Err(Error::ShapeMismatch {
                name: "mel rows".into(),
                detail: format!("every row must have {n_bins} bins"),
            });
        }
        Ok(MelMatrix {
            n_filters: rows.len(),
            n_bins,
            n_fft,
            data: rows.concat(),
        })
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_bins..(n + 1) * self.n_bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_bins)
    }

    /// Bin index of each row's maximum (first one on ties).
    pub fn peak_bins(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Peak-normalized triangular filters whose breakpoints are snapped to the
/// nearest FFT bin.
pub fn mel_matrix(cfg: &MelInitConfig) -> Result<MelMatrix> {
    cfg.validate()?;
    let bin_of = |f: f64| (f * cfg.n_fft as f64 / cfg.sample_rate as f64).round() as usize;
    let bins: Vec<usize> = cfg.breakpoints_hz().into_iter().map(bin_of).collect();
    let n_bins = cfg.n_bins();
    let mut rows = Vec::with_capacity(cfg.n_filters);
    for (channel, w) in bins.windows(3).enumerate() {
        let (left, center, right) = (w[0], w[1], w[2].min(n_bins - 1));
        if left >= center || center >= right {
            return Err(Error::DegenerateTriangle { channel });
        }
        let mut row = vec![0.0; n_bins];
        for (k, v) in row.iter_mut().enumerate().take(right + 1).skip(left) {
            *v = if k <= center {
                (k - left) as f64 / (center - left) as f64
            } else {
                (right - k) as f64 / (right - center) as f64
            };
        }
        rows.push(row);
    }
    MelMatrix::from_rows(rows, cfg.n_fft)
}

/// Learnable Gabor filterbank parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborBank {
    pub center_freqs: Vec<f64>,
    pub inv_bandwidths: Vec<f64>,
    pub filter_len: usize,
}

/// Inverse bandwidth whose frequency-domain FWHM equals `fwhm`
/// (radians/sample).
pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm_factor() / fwhm
}

pub fn fwhm_from_sigma(sigma: f64) -> f64 {
    fwhm_factor() / sigma
}

/// Admissible inverse-bandwidth range for filters of length `filter_len`:
/// FWHM between `1/W` and `1/2`.
pub fn sigma_bounds(filter_len: usize) -> (f64, f64) {
    (2.0 * fwhm_factor(), filter_len as f64 * fwhm_factor())
}

impl GaborBank {
    pub fn new(center_freqs: Vec<f64>, inv_bandwidths: Vec<f64>, filter_len: usize) -> Result<Self> {
        if center_freqs.len() != inv_bandwidths.len() {
            return Err(Error::LengthMismatch {
                left: center_freqs.len(),
                right: inv_bandwidths.len(),
            });
        }
        if filter_len.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "filter length must be odd, got {filter_len}"
            )));
        }
        Ok(GaborBank {
            center_freqs,
            inv_bandwidths,
            filter_len,
        })
    }

    /// Mel-initialized bank: one Gabor filter per triangle, centered on the
    /// triangle's peak bin with matching half-power width.
    pub fn from_mels(cfg: &MelInitConfig, filter_len: usize) -> Result<Self> {
        let mel = mel_matrix(cfg)?;
        GaborBank::from_mel_matrix(&mel, filter_len)
    }

    pub fn from_mel_matrix(mel: &MelMatrix, filter_len: usize) -> Result<Self> {
        let n_fft = mel.n_fft() as f64;
        let mut eta = Vec::with_capacity(mel.n_filters());
        let mut sigma = Vec::with_capacity(mel.n_filters());
        for row in mel.rows() {
            let peak_bin = argmax(row);
            let half = row[peak_bin] / 2.0;
            let width_bins = row.iter().filter(|&&v| v >= half).count();
            eta.push(peak_bin as f64 / n_fft);
            sigma.push(sigma_from_fwhm(TAU * width_bins as f64 / n_fft));
        }
        Ok(GaborBank::new(eta, sigma, filter_len)?.project_constraints())
    }

    pub fn n_filters(&self) -> usize {
        self.center_freqs.len()
    }

    /// Half support `(W−1)/2`; taps run over `t = −half … half`.
    pub fn half_len(&self) -> usize {
        (self.filter_len - 1) / 2
    }

    /// Clip center frequencies to `[0, 1/2]` and widths to `sigma_bounds`.
    pub fn project_constraints(&self) -> Self {
        let (lo, hi) = sigma_bounds(self.filter_len);
        GaborBank {
            center_freqs: self.center_freqs.iter().map(|e| clamp(*e, 0.0, 0.5)).collect(),
            inv_bandwidths: self.inv_bandwidths.iter().map(|s| clamp(*s, lo, hi)).collect(),
            filter_len: self.filter_len,
        }
    }

    /// Complex impulse response of channel `n`, taps ordered from
    /// `t = −(W−1)/2` to `(W−1)/2`.
    pub fn impulse_response(&self, n: usize) -> Vec<Complex64> {
        gabor_kernel(self.center_freqs[n], self.inv_bandwidths[n], self.filter_len)
    }

    /// The same filter as two real kernels (cosine and sine parts).
    pub fn real_imag(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        self.impulse_response(n).iter().map(|c| (c.re, c.im)).unzip()
    }
}

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    // NaN maps to the lower bound so projected parameters stay admissible.
    if x.is_nan() {
        lo
    } else {
        x.max(lo).min(hi)
    }
}

/// `exp(i·2π·η·t) · exp(−t²/(2σ²)) / (sqrt(2π)·σ)` on the symmetric grid.
pub fn gabor_kernel(eta: f64, sigma: f64, len: usize) -> Vec<Complex64> {
    let half = (len as isize - 1) / 2;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    (-half..=half)
        .map(|t| {
            let t = t as f64;
            let envelope = norm * (-t * t / (2.0 * sigma * sigma)).exp();
            let phase = std::f64::consts::TAU * eta * t;
            Complex64::new(envelope * phase.cos(), envelope * phase.sin())
        })
        .collect()
}

/// Squared magnitude of the zero-padded `n_points` DFT, at normalized
/// frequencies `k/n_points`.
pub fn frequency_response(filter: &[Complex64], n_points: usize) -> Result<Vec<f64>> {
    if n_points < filter.len() || n_points == 0 {
        return Err(Error::InvalidArgument(format!(
            "{n_points} DFT points cannot hold a filter of length {}",
            filter.len()
        )));
    }
    let fft = FftPair::new(n_points);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_points];
    buf[..filter.len()].copy_from_slice(filter);
    fft.forward(&mut buf);
    Ok(buf.iter().map(|c| c.norm_sqr()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_triangle_peaks_at_mel_midpoint() {
        let cfg = MelInitConfig {
            n_filters: 1,
            sample_rate: 16000,
            fmin: 0.0,
            fmax: 8000.0,
            n_fft: 512,
        };
        let m = mel_matrix(&cfg).unwrap();
        let mid_hz = mel_to_hz(hz_to_mel(8000.0) / 2.0);
        let expected = (mid_hz * 512.0 / 16000.0).round() as usize;
        assert_eq!(m.peak_bins(), vec![expected]);
        assert_eq!(m.row(0)[expected], 1.0);
    }

    #[test]
    fn rows_peak_at_one() {
        let m = mel_matrix(&MelInitConfig::default()).unwrap();
        for row in m.rows() {
            assert_eq!(row.iter().cloned().fold(f64::MIN, f64::max), 1.0);
        }
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let cfg = MelInitConfig {
            n_filters: 200,
            ..MelInitConfig::default()
        };
        assert!(matches!(mel_matrix(&cfg), Err(Error::DegenerateTriangle { .. })));
    }

    #[test]
    fn init_is_ordered_and_low_channel_near_100_hz() {
        let bank = GaborBank::from_mels(&MelInitConfig::default(), 401).unwrap();
        assert!(bank.center_freqs.windows(2).all(|w| w[0] < w[1]));
        let bin = 1.0 / 512.0;
        assert!((bank.center_freqs[0] - 100.0 / 16000.0).abs() <= bin);
    }

    #[test]
    fn origin_tap_closed_form() {
        let k = gabor_kernel(0.2, 1.0, 11);
        assert!((k[5].re - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(k[5].im, 0.0);
    }

    #[test]
    fn clamp_examples() {
        let bank = GaborBank::new(vec![0.7, 0.1], vec![1.0, 30.0], 401).unwrap();
        let p = bank.project_constraints();
        assert_eq!(p.center_freqs[0], 0.5);
        assert!((p.inv_bandwidths[0] - 4.709_640_090_061_7).abs() < 1e-9);
        assert_eq!(p.center_freqs[1], 0.1);
        assert_eq!(p.inv_bandwidths[1], 30.0);
        assert_eq!(p.project_constraints(), p);
    }

    #[test]
    fn flat_and_zero_responses() {
        let mut imp = vec![Complex64::new(0.0, 0.0); 9];
        imp[4] = Complex64::new(1.0, 0.0);
        assert!(frequency_response(&imp, 64)
            .unwrap()
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-15));
        let zero = vec![Complex64::new(0.0, 0.0); 9];
        assert!(frequency_response(&zero, 16).unwrap().iter().all(|&v| v == 0.0));
        assert!(frequency_response(&zero, 8).is_err());
    }

    #[test]
    fn dft_peak_matches_center() {
        let k = gabor_kernel(0.25, 20.0, 401);
        let r = frequency_response(&k, 1024).unwrap();
        assert_eq!(argmax(&r), 256);
    }

    #[test]
    fn init_peaks_match_mel_rows() {
        let cfg = MelInitConfig::default();
        let mel = mel_matrix(&cfg).unwrap();
        let bank = GaborBank::from_mel_matrix(&mel, 401).unwrap();
        for (n, row_peak) in mel.peak_bins().into_iter().enumerate() {
            let r = frequency_response(&bank.impulse_response(n), cfg.n_fft).unwrap();
            let peak = argmax(&r[..=cfg.n_fft / 2]);
            assert!(peak.abs_diff(row_peak) <= 1, "channel {n}: {peak} vs {row_peak}");
        }
    }

    #[test]
    fn half_max_width() {
        let (eta, sigma, k) = (0.1, 50.0, 4096);
        let r = frequency_response(&gabor_kernel(eta, sigma, 401), k).unwrap();
        let peak = r.iter().cloned().fold(0.0, f64::max);
        // Magnitude response, so half maximum of |H| is a quarter of |H|².
        let width = r[..k / 2].iter().filter(|&&v| v >= peak / 4.0).count() as f64;
        let expected = fwhm_from_sigma(sigma) * k as f64 / TAU;
        assert!((width - expected).abs() <= 0.1 * expected, "{width} vs {expected}");
    }

    proptest! {
        #[test]
        fn real_even_imag_odd(eta in 0.0f64..0.5, sigma in 4.8f64..900.0) {
            let k = gabor_kernel(eta, sigma, 401);
            for t in 0..=200 {
                prop_assert!((k[200 + t].re - k[200 - t].re).abs() <= 1e-15);
                prop_assert!((k[200 + t].im + k[200 - t].im).abs() <= 1e-15);
            }
        }

        #[test]
        fn quasi_analytic(eta in 0.05f64..0.45, sigma in 10.0f64..400.0) {
            let r = frequency_response(&gabor_kernel(eta, sigma, 401), 1024).unwrap();
            let total: f64 = r.iter().sum();
            let image: f64 = r[513..].iter().sum();
            prop_assert!(image < 0.01 * total, "{}", image / total);
        }

        #[test]
        fn projection_lands_in_range(
            eta in prop::num::f64::ANY,
            sigma in prop::num::f64::ANY,
            half in 1usize..400,
        ) {
            let w = 2 * half + 1;
            let p = GaborBank::new(vec![eta], vec![sigma], w).unwrap().project_constraints();
            let (lo, hi) = sigma_bounds(w);
            prop_assert!((0.0..=0.5).contains(&p.center_freqs[0]));
            prop_assert!(p.inv_bandwidths[0] >= lo && p.inv_bandwidths[0] <= hi);
            prop_assert_eq!(p.project_constraints(), p);
        }
    }
}
