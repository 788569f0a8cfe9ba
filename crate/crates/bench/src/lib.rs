//! Inputs shared by the benchmarks.

use leaf_core::rng::Gaussian;
use leaf_core::Waveform;

/// Seeded white noise at 16 kHz.
pub fn noise_clip(seconds: f64, seed: u64) -> Waveform {
    let n = (seconds * 16_000.0).round() as usize;
    Waveform::new(Gaussian::from_seed(seed).fill(n), 16_000).expect("finite samples")
}

/// `(clip, label)` pairs cycling through `num_classes` labels.
pub fn labelled_batch(size: usize, num_classes: usize) -> Vec<(Waveform, usize)> {
    (0..size)
        .map(|i| (noise_clip(1.0, i as u64), i % num_classes))
        .collect()
}
