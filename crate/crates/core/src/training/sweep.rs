use rand::RngCore;

use crate::error::{Error, Result};
use crate::frontend::{Compression, Filtering, FrontendConfig};
use crate::rng;
use crate::training::{ci95, evaluate, train, TaskSpec, TrainConfig};

/// A named frontend configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepVariant {
    pub name: String,
    pub cfg: FrontendConfig,
}

/// The log and sPCEN versions of the learnable and the mel frontends.
pub fn sweep_variants(base: &FrontendConfig) -> Vec<SweepVariant> {
    [
        ("leaf-log", Filtering::Gabor, Compression::Log),
        ("leaf", Filtering::Gabor, Compression::Spcen),
        ("mel", Filtering::Mel, Compression::Log),
        ("mel-pcen", Filtering::Mel, Compression::Spcen),
    ]
    .into_iter()
    .map(|(name, f, c)| SweepVariant {
        name: name.to_string(),
        cfg: base.with_variant(f, c),
    })
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub n_eval: usize,
    pub n_seeds: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            steps: 200,
            batch_size: 16,
            lr: 1e-3,
            n_eval: 300,
            n_seeds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: String,
    pub snr_db: f64,
    /// Mean over seeds.
    pub accuracy: f64,
    /// Half-width over all `n_eval·n_seeds` test clips.
    pub ci95: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "variant,snr_db,accuracy,ci95";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.variant, self.snr_db, self.accuracy, self.ci95)
    }
}

/// Train and evaluate every variant at every SNR, with the noise present
/// in both phases, averaging over `opts.n_seeds` seeds.
pub fn noise_sweep(
    task: &TaskSpec,
    snr_list: &[f64],
    variants: &[SweepVariant],
    opts: &SweepOptions,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if opts.n_seeds == 0 {
        return Err(Error::InvalidArgument("n_seeds must be at least 1".into()));
    }
    let mut task = *task;
    task.task_id = 0;
    let mut rows = Vec::new();
    for v in variants {
        for &snr_db in snr_list {
            let noisy = TaskSpec { snr_db, ..task };
            let mut total = 0.0;
            for s in 0..opts.n_seeds {
                let run_seed = rng::stream(seed, &[0x7377_6565_70, s as u64]).next_u64();
                let tc = TrainConfig {
                    steps: opts.steps,
                    batch_size: opts.batch_size,
                    lr: opts.lr,
                    seed: run_seed,
                    ..TrainConfig::default()
                };
                let out = train(&[noisy], &v.cfg, &tc)?;
                total += evaluate(&out.model, &noisy, opts.n_eval, run_seed ^ 0x7465_7374)?.accuracy;
            }
            let accuracy = total / opts.n_seeds as f64;
            rows.push(SweepRow {
                variant: v.name.clone(),
                snr_db,
                accuracy,
                ci95: ci95(accuracy, opts.n_eval * opts.n_seeds),
            });
        }
    }
    Ok(rows)
}
