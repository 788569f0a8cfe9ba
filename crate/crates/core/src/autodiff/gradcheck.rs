//! Analytic-versus-numerical gradient report for every frontend variant.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::{finite_diff_selected, loss_and_grad, loss_only, rel_error};
use crate::error::Result;
use crate::frontend::{Compression, Filtering, FrontendConfig};
use crate::model::MultiHead;
use crate::params::{self, group_of, ParamSet};
use crate::rng::{self, Gaussian};
use crate::signal::Waveform;

/// Variants covered by the report.
pub const GRADCHECK_VARIANTS: [(Filtering, Compression); 5] = [
    (Filtering::Gabor, Compression::Log),
    (Filtering::Gabor, Compression::Pcen),
    (Filtering::Gabor, Compression::Spcen),
    (Filtering::NormalizedConv, Compression::Spcen),
    (Filtering::Mel, Compression::Spcen),
];

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub clip_len: usize,
    pub batch_size: usize,
    pub num_classes: usize,
    pub h_rel: f64,
    /// Check a seeded random subset of this many entries per group; `None`
    /// checks all of them.
    pub max_params_per_group: Option<usize>,
    pub variants: Vec<(Filtering, Compression)>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            clip_len: 1600,
            batch_size: 2,
            num_classes: 3,
            h_rel: 1e-5,
            max_params_per_group: Some(32),
            variants: GRADCHECK_VARIANTS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRow {
    pub variant: String,
    pub param_group: String,
    pub max_rel_err: f64,
    pub n_params: usize,
    /// Entries with relative error below 1e−4.
    pub n_below_1e4: usize,
}

impl GradCheckRow {
    pub const CSV_HEADER: &'static str = "variant,param_group,max_rel_err,n_params";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:e},{}",
            self.variant, self.param_group, self.max_rel_err, self.n_params
        )
    }
}

/// Report with default options.
pub fn grad_check_report(cfg: &FrontendConfig, seed: u64) -> Result<Vec<GradCheckRow>> {
    grad_check_report_with(cfg, seed, &GradCheckOptions::default())
}

pub fn grad_check_report_with(cfg: &FrontendConfig, seed: u64, opts: &GradCheckOptions) -> Result<Vec<GradCheckRow>> {
    let batch = synthetic_batch(opts, cfg.sample_rate, seed)?;
    let mut rows = Vec::new();
    for (vi, &(filtering, compression)) in opts.variants.iter().enumerate() {
        let vcfg = cfg.with_variant(filtering, compression);
        let params = perturbed_params(&vcfg, opts.num_classes, seed.wrapping_add(vi as u64))?;
        let (_, analytic) = loss_and_grad(&batch, &params, &vcfg)?;

        let mut pick = rng::stream(seed, &[0x7069_636b, vi as u64]);
        let mut selection = Vec::new();
        for (name, values) in params.iter() {
            let mut idx: Vec<usize> = (0..values.len()).collect();
            if let Some(limit) = opts.max_params_per_group {
                idx.shuffle(&mut pick);
                idx.truncate(limit);
                idx.sort_unstable();
            }
            selection.extend(idx.into_iter().map(|i| (name.to_string(), i)));
        }
        let numeric = finite_diff_selected(
            &|p: &ParamSet| loss_only(&batch, p, &vcfg),
            &params,
            opts.h_rel,
            &selection,
        )?;

        let mut groups: BTreeMap<&str, (f64, usize, usize)> = BTreeMap::new();
        for ((name, i), fd) in selection.iter().zip(&numeric) {
            let a = analytic.require(name)?[*i];
            let e = rel_error(a, *fd);
            let entry = groups.entry(group_of(name)).or_insert((0.0, 0, 0));
            entry.0 = entry.0.max(e);
            entry.1 += 1;
            if e < 1e-4 {
                entry.2 += 1;
            }
        }
        for (group, (max_rel_err, n_params, n_below_1e4)) in groups {
            rows.push(GradCheckRow {
                variant: format!("{filtering}/{compression}"),
                param_group: group.to_string(),
                max_rel_err,
                n_params,
                n_below_1e4,
            });
        }
    }
    Ok(rows)
}

/// Noise plus a few random tones per clip, with random labels.
fn synthetic_batch(opts: &GradCheckOptions, rate: u32, seed: u64) -> Result<Vec<(Waveform, usize)>> {
    (0..opts.batch_size)
        .map(|i| {
            let mut g = Gaussian::new(rng::stream(seed, &[0x6261_7463_68, i as u64]));
            let noise = g.fill(opts.clip_len);
            let rng = g.rng_mut();
            let tones: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.gen_range(0.01..0.45),
                        rng.gen_range(0.1..0.6),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let label = rng.gen_range(0..opts.num_classes);
            let samples = noise
                .iter()
                .enumerate()
                .map(|(t, n)| {
                    0.2 * n
                        + tones
                            .iter()
                            .map(|(f, a, p)| a * (std::f64::consts::TAU * f * t as f64 + p).cos())
                            .sum::<f64>()
                })
                .collect();
            Ok((Waveform::new(samples, rate)?, label))
        })
        .collect()
}

/// Initialized parameters moved to a generic interior point, with random
/// head weights so every frontend parameter receives signal.
fn perturbed_params(cfg: &FrontendConfig, num_classes: usize, seed: u64) -> Result<ParamSet> {
    let model = MultiHead::init(cfg, &[num_classes])?;
    let mut ps = model.to_param_set();
    let mut g = Gaussian::new(rng::stream(seed, &[0x7065_7274]));
    let names: Vec<String> = ps.names().map(str::to_string).collect();
    for name in names {
        let mut values = ps.get(&name).expect("present").to_vec();
        for v in values.iter_mut() {
            let u: f64 = g.rng_mut().gen_range(-1.0..1.0);
            *v = match name.as_str() {
                params::ETA => (*v * (1.0 + 0.05 * u)).clamp(0.002, 0.49),
                params::SIGMA => *v * (1.0 + 0.1 * u),
                params::POOL_WIDTHS => 0.3 + 0.1 * u,
                params::PCEN_ALPHA => 0.75 + 0.2 * u,
                params::PCEN_DELTA => 1.5 + u,
                params::PCEN_ROOT => 2.2 + 0.6 * u,
                params::PCEN_SMOOTH => 0.15 + 0.1 * u,
                params::CONV_KERNELS => *v + 0.01 * u,
                _ => g.sample() * 2.0,
            };
        }
        ps.insert(name, values);
    }
    Ok(ps)
}
