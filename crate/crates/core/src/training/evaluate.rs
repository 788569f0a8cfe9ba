use rand::RngCore;
use rayon::prelude::*;

use crate::autodiff::Prepared;
use crate::error::{Error, Result};
use crate::gabor::argmax;
use crate::model::MultiHead;
use crate::rng;
use crate::signal::{Waveform, FRONTEND_RATE};
use crate::training::TaskSpec;

/// Accuracy with its normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub accuracy: f64,
    pub ci95: f64,
    pub n: usize,
}

impl Accuracy {
    pub fn from_counts(correct: usize, n: usize) -> Self {
        let p = correct as f64 / n.max(1) as f64;
        Accuracy {
            accuracy: p,
            ci95: ci95(p, n),
            n,
        }
    }
}

/// `1.96·sqrt(p(1−p)/n)`.
pub fn ci95(p: f64, n: usize) -> f64 {
    1.96 * (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

/// Logits of a clip averaged over its consecutive 1 s windows.
pub fn clip_logits(prepared: &Prepared<'_>, wave: &Waveform, task: usize) -> Result<Vec<f64>> {
    let windows = wave.windows(FRONTEND_RATE as usize);
    let mut mean: Vec<f64> = Vec::new();
    for w in &windows {
        let l = prepared.logits(w, task)?;
        if mean.is_empty() {
            mean = vec![0.0; l.len()];
        }
        for (m, v) in mean.iter_mut().zip(&l) {
            *m += v;
        }
    }
    let k = windows.len() as f64;
    Ok(mean.into_iter().map(|v| v / k).collect())
}

/// Window lengths [`clip_logits`] feeds to the frontend for a clip of `len`
/// samples.
pub fn window_lengths(len: usize) -> usize {
    len.min(FRONTEND_RATE as usize)
}

/// Seed of the `i`-th held-out clip.
pub fn eval_seed(seed: u64, task_id: usize, i: usize) -> u64 {
    rng::stream(seed, &[0x6576_616c, task_id as u64, i as u64]).next_u64()
}

/// Accuracy of `model` on `n_examples` freshly generated clips.
pub fn evaluate(model: &MultiHead, task: &TaskSpec, n_examples: usize, seed: u64) -> Result<Accuracy> {
    if n_examples == 0 {
        return Err(Error::InvalidArgument("n_examples must be at least 1".into()));
    }
    if task.task_id >= model.num_tasks() {
        return Err(Error::UnknownTask {
            task: task.task_id,
            num_tasks: model.num_tasks(),
        });
    }
    let clip_len = (task.duration_s * FRONTEND_RATE as f64).round() as usize;
    let prepared = Prepared::new(model, [window_lengths(clip_len)], false)?;
    let hits: Vec<bool> = (0..n_examples)
        .into_par_iter()
        .map(|i| {
            let (wave, label) = task.sample(eval_seed(seed, task.task_id, i))?;
            Ok(argmax(&clip_logits(&prepared, &wave, task.task_id)?) == label)
        })
        .collect::<Result<_>>()?;
    Ok(Accuracy::from_counts(hits.iter().filter(|&&h| h).count(), n_examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::FrontendConfig;

    #[test]
    fn ci_closed_form() {
        assert!((ci95(0.9, 1000) - 0.0186).abs() < 5e-5);
        assert_eq!(ci95(1.0, 10), 0.0);
    }

    #[test]
    fn constant_predictor_is_at_chance() {
        let cfg = FrontendConfig::default();
        let model = MultiHead::init(&cfg.with_variant(crate::Filtering::Mel, crate::Compression::Log), &[4]).unwrap();
        let acc = evaluate(&model, &TaskSpec::pitch(0, 20.0), 400, 1).unwrap();
        assert!((acc.accuracy - 0.25).abs() <= acc.ci95 + 0.02, "{acc:?}");
    }

    #[test]
    fn repeated_window_gives_same_logits() {
        let cfg = FrontendConfig::default().with_variant(crate::Filtering::Mel, crate::Compression::Spcen);
        let mut model = MultiHead::init(&cfg, &[4]).unwrap();
        model.heads[0].weights = crate::rng::Gaussian::from_seed(3).fill(160);
        let (one, _) = TaskSpec::pitch(0, 10.0).sample(7).unwrap();
        let mut doubled = one.samples().to_vec();
        doubled.extend_from_slice(one.samples());
        let two = Waveform::new(doubled, FRONTEND_RATE).unwrap();
        let prepared = Prepared::new(&model, [16000], false).unwrap();
        let a = clip_logits(&prepared, &one, 0).unwrap();
        let b = clip_logits(&prepared, &two, 0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(argmax(&a), argmax(&b));
    }
}
