//! Mel-filterbank baseline: Hann-windowed STFT power projected onto the
//! triangular mel filters.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPair;
use crate::frontend::compression::{log_compress, pcen_forward, PcenParams};
use crate::frontend::FeatureMap;
use crate::gabor::{mel_matrix, MelInitConfig, MelMatrix};
use crate::signal::{Waveform, FRONTEND_RATE};

/// 25 ms analysis window at 16 kHz.
pub const STFT_WINDOW: usize = 400;
/// 10 ms hop at 16 kHz.
pub const STFT_HOP: usize = 160;

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / len as f64).cos())
        .collect()
}

/// Mel power features, `ceil(T/hop) × n_filters`. Frame `m` is centered on
/// sample `m·hop`, zero-padded at the edges.
pub fn mel_power(x: &Waveform, mel: &MelMatrix, hop: usize) -> Result<FeatureMap> {
    x.require_rate(FRONTEND_RATE)?;
    let n_fft = mel.n_fft();
    if n_fft < STFT_WINDOW {
        return Err(Error::InvalidConfig(format!(
            "n_fft {n_fft} is shorter than the {STFT_WINDOW}-sample window"
        )));
    }
    if hop == 0 {
        return Err(Error::InvalidConfig("hop must be at least 1".into()));
    }
    let window = hann(STFT_WINDOW);
    let fft = FftPair::new(n_fft);
    let samples = x.samples();
    let n_frames = samples.len().div_ceil(hop);
    let n_bins = mel.n_bins();
    let mut values = Vec::with_capacity(n_frames * mel.n_filters());
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0; n_bins];
    for m in 0..n_frames {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        let start = (m * hop) as isize - (STFT_WINDOW / 2) as isize;
        for (i, w) in window.iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < samples.len() {
                buf[i].re = w * samples[idx as usize];
            }
        }
        fft.forward(&mut buf);
        for (p, b) in power.iter_mut().zip(&buf) {
            *p = b.norm_sqr();
        }
        for row in mel.rows() {
            values.push(row.iter().zip(&power).map(|(a, b)| a * b).sum());
        }
    }
    FeatureMap::new(n_frames, mel.n_filters(), values, x.sample_rate() as f64 / hop as f64)
}

/// Mel features with log compression, or PCEN when parameters are given
/// (the Mel-PCEN baseline).
pub fn mel_frontend_forward(x: &Waveform, cfg: &MelInitConfig, pcen: Option<&PcenParams>) -> Result<FeatureMap> {
    let mel = mel_matrix(cfg)?;
    let power = mel_power(x, &mel, STFT_HOP)?;
    match pcen {
        None => log_compress(&power),
        Some(p) => pcen_forward(&power, p),
    }
}
