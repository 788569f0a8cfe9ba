use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::autodiff::{run_batch, BatchOutput, Example, GradScope};
use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::model::MultiHead;
use crate::params::{Gradients, ParamSet};
use crate::rng;
use crate::training::{adam_step, AdamState, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub log_every: usize,
    /// Update only the heads.
    pub freeze_frontend: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            log_every: 50,
            freeze_frontend: false,
        }
    }
}

/// One metrics-log line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub task_id: usize,
    pub loss: f64,
    pub accuracy: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "step,task_id,loss,accuracy";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.step, self.task_id, self.loss, self.accuracy)
    }
}

/// Parameters after `step` optimizer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub params: ParamSet,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: MultiHead,
    pub metrics: Vec<MetricsRow>,
    pub snapshots: Vec<Snapshot>,
}

/// What one optimizer step saw.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: usize,
    pub batch: Vec<Example>,
    pub output: BatchOutput,
    /// Batch-mean gradients that were applied.
    pub grads: Gradients,
}

#[derive(Debug, Clone, Copy, Default)]
struct Window {
    loss: f64,
    correct: usize,
    count: usize,
}

/// Stepwise optimizer over a multi-task model. Every mini-batch is a pure
/// function of `(seed, step)`.
#[derive(Debug, Clone)]
pub struct Trainer {
    tasks: Vec<TaskSpec>,
    cfg: FrontendConfig,
    tc: TrainConfig,
    model: MultiHead,
    params: ParamSet,
    adam: AdamState,
    step: usize,
    window: Vec<Window>,
    metrics: Vec<MetricsRow>,
}

impl Trainer {
    pub fn new(tasks: &[TaskSpec], cfg: &FrontendConfig, tc: &TrainConfig) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidArgument("at least one task is required".into()));
        }
        if tc.batch_size == 0 || tc.log_every == 0 {
            return Err(Error::InvalidArgument(
                "batch size and log interval must be positive".into(),
            ));
        }
        for (k, t) in tasks.iter().enumerate() {
            if t.task_id != k {
                return Err(Error::InvalidArgument(format!("task {k} has task_id {}", t.task_id)));
            }
            if t.num_classes < 2 {
                return Err(Error::InvalidArgument(format!("task {k} has fewer than two classes")));
            }
        }
        let classes: Vec<usize> = tasks.iter().map(|t| t.num_classes).collect();
        let model = MultiHead::init(cfg, &classes)?;
        let params = model.to_param_set();
        Ok(Trainer {
            tasks: tasks.to_vec(),
            cfg: *cfg,
            tc: *tc,
            adam: AdamState::new(&params, tc.lr),
            model,
            params,
            step: 0,
            window: vec![Window::default(); tasks.len()],
            metrics: Vec::new(),
        })
    }

    pub fn model(&self) -> &MultiHead {
        &self.model
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    /// Mini-batch for a 1-based step: tasks and labels drawn uniformly.
    pub fn draw_batch(&self, step: usize) -> Result<Vec<Example>> {
        (0..self.tc.batch_size)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(self.tc.seed, &[0x7472_6169_6e, step as u64, i as u64]);
                let task = r.gen_range(0..self.tasks.len());
                let (wave, label) = self.tasks[task].sample(r.next_u64())?;
                Ok(Example::new(wave, label, task))
            })
            .collect()
    }

    /// Draw, differentiate and apply one update.
    pub fn step(&mut self) -> Result<StepReport> {
        let step = self.step + 1;
        let batch = self.draw_batch(step)?;
        let scope = if self.tc.freeze_frontend {
            GradScope::HeadsOnly
        } else {
            GradScope::All
        };
        let output = run_batch(&self.model, &batch, scope)?;
        let mut grads = output.grads.clone();
        grads.scale(1.0 / batch.len() as f64);
        adam_step(&mut self.adam, &mut self.params, &grads, Some(&self.cfg))?;
        self.model = MultiHead::from_param_set(&self.cfg, &self.params)?;
        self.step = step;

        for ((ex, loss), pred) in batch.iter().zip(&output.losses).zip(output.predictions()) {
            let w = &mut self.window[ex.task];
            w.loss += loss;
            w.count += 1;
            if pred == ex.label {
                w.correct += 1;
            }
        }
        if step.is_multiple_of(self.tc.log_every) || step == self.tc.steps {
            for (task_id, w) in self.window.iter_mut().enumerate() {
                if w.count > 0 {
                    self.metrics.push(MetricsRow {
                        step,
                        task_id,
                        loss: w.loss / w.count as f64,
                        accuracy: w.correct as f64 / w.count as f64,
                    });
                }
                *w = Window::default();
            }
        }
        Ok(StepReport {
            step,
            batch,
            output,
            grads,
        })
    }

    pub fn into_model(self) -> MultiHead {
        self.model
    }
}

/// Train for `tc.steps` steps, keeping snapshots at step 0, `steps/2` and
/// `steps`.
pub fn train(tasks: &[TaskSpec], cfg: &FrontendConfig, tc: &TrainConfig) -> Result<TrainOutput> {
    train_with(tasks, cfg, tc, |_, _| Ok(()))
}

/// [`train`] with a hook called after every step.
pub fn train_with<F>(tasks: &[TaskSpec], cfg: &FrontendConfig, tc: &TrainConfig, mut hook: F) -> Result<TrainOutput>
where
    F: FnMut(&Trainer, &StepReport) -> Result<()>,
{
    if tc.steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let mut trainer = Trainer::new(tasks, cfg, tc)?;
    let mut snapshots = vec![Snapshot {
        step: 0,
        params: trainer.params().clone(),
    }];
    while trainer.steps_done() < tc.steps {
        let report = trainer.step()?;
        hook(&trainer, &report)?;
        let s = trainer.steps_done();
        if (s == tc.steps / 2 || s == tc.steps) && snapshots.last().is_none_or(|l| l.step != s) {
            snapshots.push(Snapshot {
                step: s,
                params: trainer.params().clone(),
            });
        }
    }
    let metrics = trainer.metrics().to_vec();
    Ok(TrainOutput {
        model: trainer.into_model(),
        metrics,
        snapshots,
    })
}
