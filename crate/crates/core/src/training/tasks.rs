//! Seeded toy classification tasks.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Gaussian};
use crate::signal::{add_noise_snr, Waveform, FRONTEND_RATE};

pub const PITCH_HZ: [f64; 4] = [400.0, 800.0, 1600.0, 3200.0];
pub const AM_RATES_HZ: [f64; 3] = [4.0, 16.0, 64.0];
pub const AM_CARRIER_HZ: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Tone at one of [`PITCH_HZ`].
    Pitch,
    /// 1 kHz carrier amplitude-modulated at one of [`AM_RATES_HZ`].
    AmRate,
    /// White, lowpass or highpass noise.
    NoiseColor,
}

impl TaskKind {
    pub fn num_classes(self) -> usize {
        match self {
            TaskKind::Pitch => PITCH_HZ.len(),
            TaskKind::AmRate => AM_RATES_HZ.len(),
            TaskKind::NoiseColor => 3,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Pitch => "pitch",
            TaskKind::AmRate => "am",
            TaskKind::NoiseColor => "noisecolor",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pitch" => Ok(TaskKind::Pitch),
            "am" => Ok(TaskKind::AmRate),
            "noisecolor" => Ok(TaskKind::NoiseColor),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub task_id: usize,
    pub kind: TaskKind,
    pub num_classes: usize,
    /// Additive white noise level; `+inf` for clean clips.
    pub snr_db: f64,
    pub duration_s: f64,
}

impl TaskSpec {
    pub fn new(task_id: usize, kind: TaskKind, snr_db: f64) -> Self {
        TaskSpec {
            task_id,
            kind,
            num_classes: kind.num_classes(),
            snr_db,
            duration_s: 1.0,
        }
    }

    pub fn pitch(task_id: usize, snr_db: f64) -> Self {
        Self::new(task_id, TaskKind::Pitch, snr_db)
    }

    pub fn am_rate(task_id: usize, snr_db: f64) -> Self {
        Self::new(task_id, TaskKind::AmRate, snr_db)
    }

    pub fn noise_color(task_id: usize, snr_db: f64) -> Self {
        Self::new(task_id, TaskKind::NoiseColor, snr_db)
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s;
        self
    }

    /// Clip for `label`; a pure function of `(self, label, seed)`.
    pub fn generate(&self, label: usize, seed: u64) -> Result<Waveform> {
        if label >= self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {} classes",
                self.num_classes
            )));
        }
        let n = (self.duration_s * FRONTEND_RATE as f64).round() as usize;
        if n == 0 {
            return Err(Error::InvalidArgument("clip duration rounds to zero samples".into()));
        }
        let mut g = Gaussian::new(rng::stream(seed, &[0x636c_6970, label as u64]));
        let rate = FRONTEND_RATE as f64;
        let samples: Vec<f64> = match self.kind {
            TaskKind::Pitch => {
                let r = g.rng_mut();
                let f = PITCH_HZ[label] * (1.0 + r.gen_range(-0.02..0.02));
                let a = r.gen_range(0.3..1.0);
                let phi = r.gen_range(0.0..TAU);
                (0..n).map(|t| a * (TAU * f * t as f64 / rate + phi).cos()).collect()
            }
            TaskKind::AmRate => {
                let r = g.rng_mut();
                let fm = AM_RATES_HZ[label] * (1.0 + r.gen_range(-0.05..0.05));
                let depth = r.gen_range(0.8..1.0);
                let a = r.gen_range(0.3..0.5);
                let phi_c = r.gen_range(0.0..TAU);
                let phi_m = r.gen_range(0.0..TAU);
                (0..n)
                    .map(|t| {
                        let t = t as f64 / rate;
                        a * (1.0 + depth * (TAU * fm * t + phi_m).sin()) * (TAU * AM_CARRIER_HZ * t + phi_c).cos()
                    })
                    .collect()
            }
            TaskKind::NoiseColor => {
                let white = g.fill(n + 1);
                let colored: Vec<f64> = match label {
                    0 => white[1..].to_vec(),
                    1 => {
                        let mut state = 0.0;
                        white[1..]
                            .iter()
                            .map(|w| {
                                state = 0.9 * state + 0.1 * w;
                                state
                            })
                            .collect()
                    }
                    _ => white.windows(2).map(|w| w[1] - w[0]).collect(),
                };
                let rms = (colored.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
                let gain = g.rng_mut().gen_range(0.1..0.5) / rms;
                colored.iter().map(|v| v * gain).collect()
            }
        };
        let clean = Waveform::new(samples, FRONTEND_RATE)?;
        add_noise_snr(&clean, self.snr_db, seed ^ 0x6e6f_6973_6500_0000)
    }

    /// Uniformly drawn label and its clip.
    pub fn sample(&self, seed: u64) -> Result<(Waveform, usize)> {
        let label = rng::stream(seed, &[0x6c61_6265_6c]).gen_range(0..self.num_classes);
        Ok((self.generate(label, seed)?, label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::argmax;

    fn spectrum_peak_hz(w: &Waveform) -> f64 {
        let fft = crate::fft::FftPair::new(w.len());
        let spec = fft.forward_real(w.samples());
        let mags: Vec<f64> = spec[..w.len() / 2].iter().map(|c| c.norm()).collect();
        argmax(&mags) as f64 * FRONTEND_RATE as f64 / w.len() as f64
    }

    #[test]
    fn deterministic() {
        for kind in [TaskKind::Pitch, TaskKind::AmRate, TaskKind::NoiseColor] {
            let t = TaskSpec::new(0, kind, 10.0);
            assert_eq!(t.generate(1, 5).unwrap(), t.generate(1, 5).unwrap());
            assert_ne!(t.generate(1, 5).unwrap(), t.generate(1, 6).unwrap());
        }
    }

    #[test]
    fn pitch_peaks_at_class_frequency() {
        let t = TaskSpec::pitch(0, f64::INFINITY);
        for (label, &f) in PITCH_HZ.iter().enumerate() {
            let peak = spectrum_peak_hz(&t.generate(label, 3).unwrap());
            assert!((peak - f).abs() <= 0.021 * f, "{peak} vs {f}");
        }
    }

    #[test]
    fn am_peaks_at_carrier() {
        let t = TaskSpec::am_rate(0, f64::INFINITY);
        for label in 0..3 {
            let peak = spectrum_peak_hz(&t.generate(label, 9).unwrap());
            assert!((peak - AM_CARRIER_HZ).abs() < 2.0);
        }
    }

    #[test]
    fn noise_colors_differ_in_balance() {
        let t = TaskSpec::noise_color(0, f64::INFINITY);
        let low_share = |label| {
            let w = t.generate(label, 4).unwrap();
            let spec = crate::fft::FftPair::new(w.len()).forward_real(w.samples());
            let half = w.len() / 2;
            let total: f64 = spec[..half].iter().map(|c| c.norm_sqr()).sum();
            spec[..half / 4].iter().map(|c| c.norm_sqr()).sum::<f64>() / total
        };
        let (white, low, high) = (low_share(0), low_share(1), low_share(2));
        assert!((white - 0.25).abs() < 0.05);
        assert!(low > 0.8);
        assert!(high < 0.1);
    }

    #[test]
    fn labels_balanced() {
        let t = TaskSpec::pitch(0, 20.0);
        let mut counts = [0usize; 4];
        for s in 0..2000 {
            let label = rng::stream(s, &[0x6c61_6265_6c]).gen_range(0..4);
            counts[label] += 1;
        }
        assert!(counts.iter().all(|&c| (400..600).contains(&c)), "{counts:?}");
        assert!(t.generate(4, 0).is_err());
    }

    #[test]
    fn task_names_round_trip() {
        for kind in [TaskKind::Pitch, TaskKind::AmRate, TaskKind::NoiseColor] {
            assert_eq!(kind.to_string().parse::<TaskKind>().unwrap(), kind);
        }
        assert!("speech".parse::<TaskKind>().is_err());
    }
}
