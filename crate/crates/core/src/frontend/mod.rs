//! Forward passes of every frontend variant.
//!
//! LEAF is `filter_squared_modulus → pool_decimate → sPCEN`. The same
//! pipeline with log or fixed-smoothing PCEN, the ℓ2-normalized
//! convolution variant and the mel-filterbank baseline are selected through
//! [`FrontendConfig`].

mod compression;
mod filtering;
mod mel;
mod pooling;

use std::fmt;
use std::str::FromStr;

pub use compression::{log_compress, pcen_forward, PcenParams, LOG_FLOOR};
pub use filtering::{filter_squared_modulus, renormalize_conv, ConvBank, FilterBankRef};
pub use mel::{mel_frontend_forward, mel_power, STFT_WINDOW};
pub use pooling::{gaussian_lowpass_kernel, pool_decimate, PoolingParams};

pub(crate) use compression::{log_backward, pcen_backward, pcen_channel, PcenCache};
pub(crate) use filtering::{gabor_param_grads, FilterOutput, FilterPlan};
pub(crate) use pooling::PoolPlan;

use crate::error::{Error, Result};
use crate::gabor::{GaborBank, MelInitConfig, MelMatrix};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compression {
    Log,
    /// PCEN with learnable α, δ, root and a fixed smoothing coefficient.
    Pcen,
    /// PCEN with per-channel learnable smoothing.
    Spcen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Filtering {
    Gabor,
    NormalizedConv,
    /// Fixed mel-filterbank on an STFT power spectrogram.
    Mel,
}

impl fmt::Display for Compression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Compression::Log => "log",
            Compression::Pcen => "pcen",
            Compression::Spcen => "spcen",
        })
    }
}

impl FromStr for Compression {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Compression::Log),
            "pcen" => Ok(Compression::Pcen),
            "spcen" => Ok(Compression::Spcen),
            _ => Err(Error::InvalidConfig(format!("unknown compression `{s}`"))),
        }
    }
}

impl fmt::Display for Filtering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Filtering::Gabor => "gabor",
            Filtering::NormalizedConv => "normalized_conv",
            Filtering::Mel => "mel",
        })
    }
}

impl FromStr for Filtering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gabor" => Ok(Filtering::Gabor),
            "normalized_conv" => Ok(Filtering::NormalizedConv),
            "mel" => Ok(Filtering::Mel),
            _ => Err(Error::InvalidConfig(format!("unknown filtering `{s}`"))),
        }
    }
}

/// Shapes and variant selection for a frontend. The mel design grid
/// (`fmin`, `fmax`, `n_fft`) is shared by the mel baseline and the Gabor
/// initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontendConfig {
    pub n_filters: usize,
    pub filter_len: usize,
    pub pool_len: usize,
    pub pool_stride: usize,
    pub compression: Compression,
    pub filtering: Filtering,
    pub sample_rate: u32,
    pub fmin: f64,
    pub fmax: f64,
    pub n_fft: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            n_filters: 40,
            filter_len: 401,
            pool_len: 401,
            pool_stride: 160,
            compression: Compression::Spcen,
            filtering: Filtering::Gabor,
            sample_rate: 16_000,
            fmin: 60.0,
            fmax: 7800.0,
            n_fft: 512,
        }
    }
}

impl FrontendConfig {
    pub fn leaf() -> Self {
        FrontendConfig::default()
    }

    pub fn with_variant(self, filtering: Filtering, compression: Compression) -> Self {
        FrontendConfig {
            filtering,
            compression,
            ..self
        }
    }

    pub fn mel_config(&self) -> MelInitConfig {
        MelInitConfig {
            n_filters: self.n_filters,
            sample_rate: self.sample_rate,
            fmin: self.fmin,
            fmax: self.fmax,
            n_fft: self.n_fft,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_filters == 0 {
            return Err(Error::InvalidConfig("n_filters must be at least 1".into()));
        }
        if self.filter_len.is_multiple_of(2) {
            return Err(Error::InvalidConfig("filter_len must be odd".into()));
        }
        if self.pool_len.is_multiple_of(2) {
            return Err(Error::InvalidConfig("pool_len must be odd".into()));
        }
        if self.pool_stride == 0 {
            return Err(Error::InvalidConfig("pool_stride must be at least 1".into()));
        }
        if self.sample_rate != crate::signal::FRONTEND_RATE {
            return Err(Error::BadRate {
                got: self.sample_rate,
                expected: crate::signal::FRONTEND_RATE,
            });
        }
        self.mel_config().validate()
    }

    /// Feature frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.pool_stride as f64
    }

    /// Frames produced for `t` input samples.
    pub fn n_frames(&self, t: usize) -> usize {
        t.div_ceil(self.pool_stride)
    }
}

/// Number of learnable frontend parameters.
pub fn param_count(cfg: &FrontendConfig) -> usize {
    let n = cfg.n_filters;
    let filters = match cfg.filtering {
        Filtering::Gabor => 2 * n,
        Filtering::NormalizedConv => 2 * n * cfg.filter_len,
        Filtering::Mel => 0,
    };
    let pooling = match cfg.filtering {
        Filtering::Mel => 0,
        _ => n,
    };
    let compression = match cfg.compression {
        Compression::Log => 0,
        Compression::Pcen => 3 * n,
        Compression::Spcen => 4 * n,
    };
    filters + pooling + compression
}

/// Time-frequency features, `n_frames × n_channels`, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    n_frames: usize,
    n_channels: usize,
    values: Vec<f64>,
    frame_rate: f64,
}

impl FeatureMap {
    pub fn new(n_frames: usize, n_channels: usize, values: Vec<f64>, frame_rate: f64) -> Result<Self> {
        if values.len() != n_frames * n_channels {
            return Err(Error::ShapeMismatch {
                name: "feature map".into(),
                detail: format!("{} values for {n_frames}×{n_channels}", values.len()),
            });
        }
        Ok(FeatureMap {
            n_frames,
            n_channels,
            values,
            frame_rate,
        })
    }

    /// Transpose channel-major rows into a time-major map.
    pub fn from_channels(channels: &[Vec<f64>], frame_rate: f64) -> Self {
        let n_channels = channels.len();
        let n_frames = channels.first().map_or(0, Vec::len);
        let mut values = vec![0.0; n_frames * n_channels];
        for (n, ch) in channels.iter().enumerate() {
            for (m, &v) in ch.iter().enumerate() {
                values[m * n_channels + n] = v;
            }
        }
        FeatureMap {
            n_frames,
            n_channels,
            values,
            frame_rate,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, frame: usize, channel: usize) -> f64 {
        self.values[frame * self.n_channels + channel]
    }

    pub fn frame(&self, m: usize) -> &[f64] {
        &self.values[m * self.n_channels..(m + 1) * self.n_channels]
    }

    pub fn channel(&self, n: usize) -> Vec<f64> {
        (0..self.n_frames).map(|m| self.get(m, n)).collect()
    }

    pub fn channels(&self) -> Vec<Vec<f64>> {
        (0..self.n_channels).map(|n| self.channel(n)).collect()
    }

    /// Per-channel average over frames.
    pub fn time_mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_channels];
        for m in 0..self.n_frames {
            for (a, v) in acc.iter_mut().zip(self.frame(m)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / self.n_frames.max(1) as f64).collect()
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        FeatureMap {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// The filtering stage's learnable state.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterParams {
    Gabor(GaborBank),
    Conv(ConvBank),
    Mel(MelMatrix),
}

/// All learnable frontend state for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendParams {
    pub filters: FilterParams,
    /// Absent for the mel baseline, whose pooling is the STFT framing.
    pub pooling: Option<PoolingParams>,
    /// Absent for log compression.
    pub pcen: Option<PcenParams>,
}

impl FrontendParams {
    /// Mel-scale initialization for any variant.
    pub fn init(cfg: &FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        let mel_cfg = cfg.mel_config();
        let filters = match cfg.filtering {
            Filtering::Gabor => FilterParams::Gabor(GaborBank::from_mels(&mel_cfg, cfg.filter_len)?),
            Filtering::NormalizedConv => {
                FilterParams::Conv(ConvBank::from_gabor(&GaborBank::from_mels(&mel_cfg, cfg.filter_len)?)?)
            }
            Filtering::Mel => FilterParams::Mel(crate::gabor::mel_matrix(&mel_cfg)?),
        };
        let pooling = match cfg.filtering {
            Filtering::Mel => None,
            _ => Some(PoolingParams::init(cfg.n_filters)),
        };
        let pcen = match cfg.compression {
            Compression::Log => None,
            _ => Some(PcenParams::init(cfg.n_filters)),
        };
        Ok(FrontendParams { filters, pooling, pcen })
    }
}

/// Filtering and pooling only (the representation before compression).
pub fn frontend_features(x: &Waveform, params: &FrontendParams, cfg: &FrontendConfig) -> Result<FeatureMap> {
    x.require_rate(cfg.sample_rate)?;
    match &params.filters {
        FilterParams::Mel(mel) => mel_power(x, mel, cfg.pool_stride),
        FilterParams::Gabor(bank) => {
            let f = filter_squared_modulus(x, FilterBankRef::Gabor(bank))?;
            pool_decimate(&f, require_pooling(params)?, cfg)
        }
        FilterParams::Conv(bank) => {
            let f = filter_squared_modulus(x, FilterBankRef::Conv(bank))?;
            pool_decimate(&f, require_pooling(params)?, cfg)
        }
    }
}

fn require_pooling(params: &FrontendParams) -> Result<&PoolingParams> {
    params
        .pooling
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("learnable filtering needs pooling parameters".into()))
}

/// Full forward pass: filtering, pooling, compression.
pub fn frontend_forward(x: &Waveform, params: &FrontendParams, cfg: &FrontendConfig) -> Result<FeatureMap> {
    let features = frontend_features(x, params, cfg)?;
    compress(&features, params, cfg)
}

/// Per-channel Pearson correlation between the mel-initialized Gabor
/// frontend and the mel filterbank, both before compression.
pub fn mel_equivalence(x: &Waveform, cfg: &FrontendConfig) -> Result<Vec<f64>> {
    let gabor_cfg = cfg.with_variant(Filtering::Gabor, Compression::Log);
    let leaf = frontend_features(x, &FrontendParams::init(&gabor_cfg)?, &gabor_cfg)?;
    let mel = mel_power(x, &crate::gabor::mel_matrix(&cfg.mel_config())?, cfg.pool_stride)?;
    Ok((0..cfg.n_filters)
        .map(|n| pearson(&leaf.channel(n), &mel.channel(n)))
        .collect())
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

pub(crate) fn compress(features: &FeatureMap, params: &FrontendParams, cfg: &FrontendConfig) -> Result<FeatureMap> {
    match cfg.compression {
        Compression::Log => log_compress(features),
        Compression::Pcen | Compression::Spcen => {
            let p = params
                .pcen
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("PCEN compression needs PCEN parameters".into()))?;
            pcen_forward(features, p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_four_counts() {
        let n64 = FrontendConfig {
            n_filters: 64,
            ..FrontendConfig::default()
        };
        assert_eq!(param_count(&n64), 448);
        assert_eq!(param_count(&n64.with_variant(Filtering::Mel, Compression::Spcen)), 256);
        assert_eq!(
            param_count(&FrontendConfig::default().with_variant(Filtering::Mel, Compression::Log)),
            0
        );
        assert_eq!(
            param_count(&FrontendConfig::default().with_variant(Filtering::Gabor, Compression::Log)),
            120
        );
        assert_eq!(
            param_count(&FrontendConfig::default().with_variant(Filtering::NormalizedConv, Compression::Spcen)),
            2 * 40 * 401 + 40 + 160
        );
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 4.5 / (2.0f64 * 61.0 / 6.0).sqrt()).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 2.0]), 0.0);
    }

    #[test]
    fn mel_equivalence_on_noise() {
        let x = Waveform::new(crate::rng::Gaussian::from_seed(0).fill(16000), 16000).unwrap();
        let r = mel_equivalence(&x, &FrontendConfig::default()).unwrap();
        assert_eq!(r.len(), 40);
        assert!(r.iter().all(|&c| c >= 0.8), "{r:?}");
        let mut sorted = r.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[20] >= 0.9, "{r:?}");
    }

    #[test]
    fn frame_counts() {
        let cfg = FrontendConfig::default();
        assert_eq!(cfg.n_frames(16000), 100);
        assert_eq!(cfg.n_frames(16001), 101);
        assert_eq!(cfg.frame_rate(), 100.0);
    }
}
