//! Waveforms: WAV ingestion, synthetic tones and SNR-controlled noise.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Gaussian};

/// Sample rate every frontend expects.
pub const FRONTEND_RATE: u32 = 16_000;

/// Mono audio clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Wrap samples, rejecting empty or non-finite input.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("waveform has no samples".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    /// Fails with `BadRate` unless the clip is at the frontend rate.
    pub fn require_rate(&self, expected: u32) -> Result<()> {
        if self.sample_rate != expected {
            return Err(Error::BadRate {
                got: self.sample_rate,
                expected,
            });
        }
        Ok(())
    }

    /// Consecutive non-overlapping windows of `len` samples. A clip shorter
    /// than one window yields itself.
    pub fn windows(&self, len: usize) -> Vec<Waveform> {
        if len == 0 || self.samples.len() <= len {
            return vec![self.clone()];
        }
        self.samples
            .chunks_exact(len)
            .map(|c| Waveform {
                samples: c.to_vec(),
                sample_rate: self.sample_rate,
            })
            .collect()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// Read a PCM16 mono RIFF/WAVE file.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let bytes = std::fs::read(path)?;
    parse_wav(&bytes)
}

/// Parse an in-memory PCM16 mono RIFF/WAVE file. Chunks other than `fmt `
/// and `data` are skipped.
pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav("missing RIFF/WAVE magic".into()));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::NotWav(format!("chunk {:?} is truncated", ascii(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::NotWav("fmt chunk too short".into()));
                }
                let tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes([body[14], body[15]]);
                format = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    format.ok_or_else(|| Error::NotWav("data chunk before fmt chunk".into()))?;
                if tag != 1 {
                    return Err(Error::UnsupportedFormat(format!("format tag {tag} is not PCM")));
                }
                if channels != 1 {
                    return Err(Error::UnsupportedFormat(format!("{channels} channels, expected mono")));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedFormat(format!("{bits}-bit samples, expected 16")));
                }
                let samples: Vec<f64> = body
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                    .collect();
                return Waveform::new(samples, rate);
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }
    Err(Error::NotWav("no data chunk".into()))
}

/// Canonical 44-byte-header PCM16 mono WAV.
pub fn encode_wav(samples: &[i16], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Write `x` as PCM16, rounding `x·32768` and saturating.
pub fn write_wav(path: impl AsRef<Path>, x: &Waveform) -> Result<()> {
    let pcm: Vec<i16> = x
        .samples()
        .iter()
        .map(|&v| (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
        .collect();
    std::fs::write(path, encode_wav(&pcm, x.sample_rate()))?;
    Ok(())
}

fn ascii(id: &[u8]) -> String {
    id.iter().map(|&b| b as char).collect()
}

/// Sum of sinusoids.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneSpec {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub duration_s: f64,
    pub phase_seed: u64,
    /// Explicit phases in radians; when absent they are drawn from `phase_seed`.
    pub phases: Option<Vec<f64>>,
}

impl ToneSpec {
    pub fn new(frequencies: Vec<f64>, amplitudes: Vec<f64>, duration_s: f64, phase_seed: u64) -> Self {
        ToneSpec {
            frequencies,
            amplitudes,
            duration_s,
            phase_seed,
            phases: None,
        }
    }

    pub fn with_phases(mut self, phases: Vec<f64>) -> Self {
        self.phases = Some(phases);
        self
    }
}

/// Render `Σ a_k cos(2π f_k t / rate + φ_k)`.
pub fn synth_tones(spec: &ToneSpec, rate: u32) -> Result<Waveform> {
    if spec.frequencies.len() != spec.amplitudes.len() {
        return Err(Error::LengthMismatch {
            left: spec.frequencies.len(),
            right: spec.amplitudes.len(),
        });
    }
    let nyquist = rate as f64 / 2.0;
    for &f in &spec.frequencies {
        if f >= nyquist {
            return Err(Error::AliasedFrequency { freq: f, nyquist });
        }
        if !(f > 0.0) {
            return Err(Error::InvalidArgument(format!("tone frequency {f} must be positive")));
        }
    }
    let phases = match &spec.phases {
        Some(p) if p.len() != spec.frequencies.len() => {
            return Err(Error::LengthMismatch {
                left: spec.frequencies.len(),
                right: p.len(),
            })
        }
        Some(p) => p.clone(),
        None => {
            let mut rng = rng::stream(spec.phase_seed, &[0x7068_6173_65]);
            spec.frequencies
                .iter()
                .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
                .collect()
        }
    };
    let n = (spec.duration_s * rate as f64).round() as usize;
    let mut out = vec![0.0; n];
    for ((&f, &a), &phi) in spec.frequencies.iter().zip(&spec.amplitudes).zip(&phases) {
        let step = std::f64::consts::TAU * f / rate as f64;
        for (t, o) in out.iter_mut().enumerate() {
            *o += a * (step * t as f64 + phi).cos();
        }
    }
    Waveform::new(out, rate)
}

/// Add seeded white Gaussian noise scaled so the clip-level SNR equals
/// `snr_db`. `+inf` returns the input unchanged.
pub fn add_noise_snr(x: &Waveform, snr_db: f64, seed: u64) -> Result<Waveform> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("SNR {snr_db} dB")));
    }
    let signal_power = x.power();
    if signal_power == 0.0 {
        return Err(Error::SilentInput);
    }
    let noise = Gaussian::from_seed(seed).fill(x.len());
    let noise_power = mean_square(&noise);
    let gain = (signal_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt();
    let samples = x.samples().iter().zip(&noise).map(|(s, n)| s + gain * n).collect();
    Waveform::new(samples, x.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wav_bytes(samples: &[i16], rate: u32, extra_chunk: bool) -> Vec<u8> {
        let mut fmt = Vec::new();
        fmt.extend_from_slice(&1u16.to_le_bytes());
        fmt.extend_from_slice(&1u16.to_le_bytes());
        fmt.extend_from_slice(&rate.to_le_bytes());
        fmt.extend_from_slice(&(rate * 2).to_le_bytes());
        fmt.extend_from_slice(&2u16.to_le_bytes());
        fmt.extend_from_slice(&16u16.to_le_bytes());
        let mut body = b"WAVE".to_vec();
        body.extend_from_slice(b"fmt ");
        body.extend_from_slice(&(fmt.len() as u32).to_le_bytes());
        body.extend_from_slice(&fmt);
        if extra_chunk {
            body.extend_from_slice(b"LIST");
            body.extend_from_slice(&3u32.to_le_bytes());
            body.extend_from_slice(&[1, 2, 3, 0]);
        }
        body.extend_from_slice(b"data");
        body.extend_from_slice(&((samples.len() * 2) as u32).to_le_bytes());
        for s in samples {
            body.extend_from_slice(&s.to_le_bytes());
        }
        let mut out = b"RIFF".to_vec();
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    #[test]
    fn canonical_writer_round_trips() {
        let pcm = [-32768i16, -1, 0, 1, 12345, 32767];
        let bytes = encode_wav(&pcm, 16000);
        assert_eq!(bytes.len(), 44 + 12);
        let w = parse_wav(&bytes).unwrap();
        let back: Vec<i16> = w.samples().iter().map(|&v| (v * 32768.0) as i16).collect();
        assert_eq!(back, pcm);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_wav(&path, &w).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn pcm_scaling() {
        let w = parse_wav(&wav_bytes(&[-32768, 16384, 0, 32767], 16000, false)).unwrap();
        assert_eq!(w.samples()[0], -1.0);
        assert_eq!(w.samples()[1], 0.5);
        assert_eq!(w.samples()[2], 0.0);
        assert_eq!(w.sample_rate(), 16000);
    }

    #[test]
    fn odd_sized_chunks_are_skipped() {
        let w = parse_wav(&wav_bytes(&[100, -100], 16000, true)).unwrap();
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn rejects_garbage_and_stereo() {
        assert!(matches!(parse_wav(b"RIFX0000WAVE"), Err(Error::NotWav(_))));
        let mut bytes = wav_bytes(&[0, 0], 16000, false);
        // channel count lives at offset 22
        bytes[22] = 2;
        assert!(matches!(parse_wav(&bytes), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn tone_closed_form() {
        let spec = ToneSpec::new(vec![1000.0], vec![1.0], 0.01, 0).with_phases(vec![0.0]);
        let w = synth_tones(&spec, 16000).unwrap();
        assert_eq!(w.len(), 160);
        assert!(w.samples()[4].abs() < 1e-12);
        assert_eq!(w.samples()[0], 1.0);
    }

    #[test]
    fn empty_tone_list_is_silence() {
        let w = synth_tones(&ToneSpec::new(vec![], vec![], 0.1, 3), 16000).unwrap();
        assert!(w.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn antiphase_cancels() {
        let spec = ToneSpec::new(vec![440.0, 440.0], vec![0.7, 0.7], 0.5, 0)
            .with_phases(vec![0.3, 0.3 + std::f64::consts::PI]);
        let w = synth_tones(&spec, 16000).unwrap();
        assert!(w.samples().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn aliased_tone_rejected() {
        let spec = ToneSpec::new(vec![8000.0], vec![1.0], 0.1, 0);
        assert!(matches!(synth_tones(&spec, 16000), Err(Error::AliasedFrequency { .. })));
    }

    #[test]
    fn infinite_snr_is_identity() {
        let x = synth_tones(&ToneSpec::new(vec![300.0], vec![0.5], 0.1, 1), 16000).unwrap();
        assert_eq!(add_noise_snr(&x, f64::INFINITY, 9).unwrap(), x);
    }

    #[test]
    fn silent_input_rejected() {
        let x = Waveform::new(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(add_noise_snr(&x, 0.0, 1), Err(Error::SilentInput)));
    }

    #[test]
    fn noise_power_at_zero_db() {
        // cos with unit amplitude has P = 0.5
        let x = synth_tones(&ToneSpec::new(vec![1000.0], vec![1.0], 1.0, 0), 16000).unwrap();
        assert!((x.power() - 0.5).abs() < 1e-9);
        let y = add_noise_snr(&x, 0.0, 42).unwrap();
        let noise: Vec<f64> = y.samples().iter().zip(x.samples()).map(|(a, b)| a - b).collect();
        let p = mean_square(&noise);
        assert!((p - 0.5).abs() / 0.5 < 0.02, "noise power {p}");
    }

    #[test]
    fn minus_five_db_gain() {
        let x = synth_tones(&ToneSpec::new(vec![500.0], vec![0.3], 1.0, 2), 16000).unwrap();
        let y = add_noise_snr(&x, -5.0, 3).unwrap();
        let noise: Vec<f64> = y.samples().iter().zip(x.samples()).map(|(a, b)| a - b).collect();
        let ratio = mean_square(&noise) / x.power();
        assert!((ratio - 10f64.powf(0.5)).abs() / 10f64.powf(0.5) < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn measured_snr_matches_request(
            snr_db in -20.0f64..40.0,
            seed in any::<u64>(),
            len in 16000usize..20000,
            f in 50.0f64..7000.0,
        ) {
            let x = synth_tones(&ToneSpec::new(vec![f], vec![0.3], len as f64 / 16000.0, seed), 16000).unwrap();
            let y = add_noise_snr(&x, snr_db, seed).unwrap();
            prop_assert_eq!(&y, &add_noise_snr(&x, snr_db, seed).unwrap());
            let noise: Vec<f64> = y.samples().iter().zip(x.samples()).map(|(a, b)| a - b).collect();
            let measured = 10.0 * (x.power() / mean_square(&noise)).log10();
            prop_assert!((measured - snr_db).abs() < 0.2, "{measured} vs {snr_db}");
        }

        #[test]
        fn writer_round_trip(pcm in prop::collection::vec(any::<i16>(), 1..200)) {
            let w = parse_wav(&encode_wav(&pcm, 16000)).unwrap();
            let back: Vec<i16> = w.samples().iter().map(|&v| (v * 32768.0) as i16).collect();
            prop_assert_eq!(back, pcm);
        }
    }
}
