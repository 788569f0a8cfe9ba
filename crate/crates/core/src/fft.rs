//! Thin helpers over `rustfft` for zero-padded linear convolution.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Smallest integer ≥ `n` of the form `2^a·3^b`; transforms of these sizes
/// are the fastest in `rustfft`.
pub fn smooth_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Forward and inverse plans of one size. The inverse is unnormalized, as in
/// `rustfft`; `inverse` divides by the length.
#[derive(Clone)]
pub struct FftPair {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Zero-padded forward transform of a real sequence.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fwd.process(&mut buf);
        buf
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform without the `1/len` factor.
    pub fn inverse_unscaled(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let scale = 1.0 / self.len as f64;
        for b in buf.iter_mut() {
            *b *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_len(16200), 16384);
        assert_eq!(smooth_len(7), 8);
        assert_eq!(smooth_len(1), 1);
        assert_eq!(smooth_len(121), 128);
        assert_eq!(smooth_len(1100), 1152);
    }

    #[test]
    fn roundtrip() {
        let p = FftPair::new(12);
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let mut s = p.forward_real(&x);
        p.inverse(&mut s);
        for (a, b) in s.iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }
}
