//! Frontend plus one linear head per task, and its flat parameter view.

use crate::error::{Error, Result};
use crate::frontend::{
    renormalize_conv, Compression, ConvBank, FilterParams, Filtering, FrontendConfig, FrontendParams, PcenParams,
    PoolingParams,
};
use crate::gabor::{mel_matrix, GaborBank};
use crate::params::{self, head_key, ParamSet};

/// Linear classifier over time-averaged features.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    /// `num_classes × n_features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Head {
    pub fn zeros(num_classes: usize, n_features: usize) -> Self {
        Head {
            weights: vec![0.0; num_classes * n_features],
            bias: vec![0.0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(z.len())
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }
}

/// Shared frontend with `K` task heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHead {
    pub cfg: FrontendConfig,
    pub frontend: FrontendParams,
    pub heads: Vec<Head>,
}

impl MultiHead {
    /// Mel-initialized frontend and zero heads.
    pub fn init(cfg: &FrontendConfig, num_classes: &[usize]) -> Result<Self> {
        if num_classes.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one head".into()));
        }
        Ok(MultiHead {
            cfg: *cfg,
            frontend: FrontendParams::init(cfg)?,
            heads: num_classes.iter().map(|&c| Head::zeros(c, cfg.n_filters)).collect(),
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.heads.len()
    }

    pub fn to_param_set(&self) -> ParamSet {
        let mut ps = frontend_param_set(&self.frontend, &self.cfg);
        let k_total = self.heads.len();
        for (k, h) in self.heads.iter().enumerate() {
            ps.insert(head_key(params::HEAD_WEIGHTS, k, k_total), h.weights.clone());
            ps.insert(head_key(params::HEAD_BIAS, k, k_total), h.bias.clone());
        }
        ps
    }

    pub fn from_param_set(cfg: &FrontendConfig, ps: &ParamSet) -> Result<Self> {
        cfg.validate()?;
        let frontend = frontend_from_param_set(cfg, ps)?;
        let heads = heads_from_param_set(cfg.n_filters, ps)?;
        Ok(MultiHead {
            cfg: *cfg,
            frontend,
            heads,
        })
    }
}

/// Learnable frontend parameters under their canonical names.
pub fn frontend_param_set(fp: &FrontendParams, cfg: &FrontendConfig) -> ParamSet {
    let mut ps = ParamSet::new();
    match &fp.filters {
        FilterParams::Gabor(b) => {
            ps.insert(params::ETA, b.center_freqs.clone());
            ps.insert(params::SIGMA, b.inv_bandwidths.clone());
        }
        FilterParams::Conv(b) => ps.insert(params::CONV_KERNELS, b.kernels.concat()),
        FilterParams::Mel(_) => {}
    }
    if let Some(p) = &fp.pooling {
        ps.insert(params::POOL_WIDTHS, p.widths.clone());
    }
    if let Some(p) = &fp.pcen {
        ps.insert(params::PCEN_ALPHA, p.alpha.clone());
        ps.insert(params::PCEN_DELTA, p.delta.clone());
        ps.insert(params::PCEN_ROOT, p.root.clone());
        if cfg.compression == Compression::Spcen {
            ps.insert(params::PCEN_SMOOTH, p.smooth.clone());
        }
    }
    ps
}

fn vector(ps: &ParamSet, name: &str, len: usize) -> Result<Vec<f64>> {
    let v = ps.require(name)?;
    if v.len() != len {
        return Err(Error::ShapeMismatch {
            name: name.to_string(),
            detail: format!("expected {len} values, found {}", v.len()),
        });
    }
    Ok(v.to_vec())
}

pub fn frontend_from_param_set(cfg: &FrontendConfig, ps: &ParamSet) -> Result<FrontendParams> {
    let n = cfg.n_filters;
    let filters = match cfg.filtering {
        Filtering::Gabor => FilterParams::Gabor(GaborBank::new(
            vector(ps, params::ETA, n)?,
            vector(ps, params::SIGMA, n)?,
            cfg.filter_len,
        )?),
        Filtering::NormalizedConv => {
            let flat = vector(ps, params::CONV_KERNELS, 2 * n * cfg.filter_len)?;
            FilterParams::Conv(ConvBank {
                kernels: flat.chunks_exact(cfg.filter_len).map(<[f64]>::to_vec).collect(),
            })
        }
        Filtering::Mel => FilterParams::Mel(mel_matrix(&cfg.mel_config())?),
    };
    let pooling = match cfg.filtering {
        Filtering::Mel => None,
        _ => Some(PoolingParams {
            widths: vector(ps, params::POOL_WIDTHS, n)?,
        }),
    };
    let pcen = match cfg.compression {
        Compression::Log => None,
        c => Some(PcenParams {
            alpha: vector(ps, params::PCEN_ALPHA, n)?,
            delta: vector(ps, params::PCEN_DELTA, n)?,
            root: vector(ps, params::PCEN_ROOT, n)?,
            smooth: if c == Compression::Spcen {
                vector(ps, params::PCEN_SMOOTH, n)?
            } else {
                vec![PcenParams::INIT_SMOOTH; n]
            },
            eps: PcenParams::EPS,
        }),
    };
    Ok(FrontendParams { filters, pooling, pcen })
}

fn heads_from_param_set(n_features: usize, ps: &ParamSet) -> Result<Vec<Head>> {
    let load = |wk: &str, bk: &str| -> Result<Head> {
        let bias = ps.require(bk)?.to_vec();
        let weights = vector(ps, wk, bias.len() * n_features)?;
        Ok(Head { weights, bias })
    };
    if ps.contains(params::HEAD_WEIGHTS) {
        return Ok(vec![load(params::HEAD_WEIGHTS, params::HEAD_BIAS)?]);
    }
    let mut heads = Vec::new();
    loop {
        let k = heads.len();
        let wk = format!("{}.{k}", params::HEAD_WEIGHTS);
        if !ps.contains(&wk) {
            break;
        }
        heads.push(load(&wk, &format!("{}.{k}", params::HEAD_BIAS))?);
    }
    if heads.is_empty() {
        return Err(Error::ShapeMismatch {
            name: params::HEAD_WEIGHTS.into(),
            detail: "no head parameters".into(),
        });
    }
    Ok(heads)
}

/// Clamp every constrained group into its admissible range and renormalize
/// convolution kernels.
pub fn project_param_set(ps: &mut ParamSet, cfg: &FrontendConfig) -> Result<()> {
    let (slo, shi) = crate::gabor::sigma_bounds(cfg.filter_len);
    let (wlo, whi) = PoolingParams::bounds(cfg.pool_len);
    let clip = |v: &mut Vec<f64>, lo: f64, hi: f64| {
        for x in v.iter_mut() {
            *x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
        }
    };
    for (name, v) in ps.iter_mut() {
        match name {
            params::ETA => clip(v, 0.0, 0.5),
            params::SIGMA => clip(v, slo, shi),
            params::POOL_WIDTHS => clip(v, wlo, whi),
            params::PCEN_ALPHA | params::PCEN_SMOOTH => clip(v, 0.0, 1.0),
            params::PCEN_DELTA => clip(v, 0.0, f64::MAX),
            params::PCEN_ROOT => clip(v, 1.0, f64::MAX),
            params::CONV_KERNELS => {
                let bank = ConvBank {
                    kernels: v.chunks_exact(cfg.filter_len).map(<[f64]>::to_vec).collect(),
                };
                *v = renormalize_conv(&bank)?.kernels.concat();
            }
            _ => {}
        }
    }
    Ok(())
}
