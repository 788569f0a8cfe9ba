//! Optimization, toy tasks, evaluation and significance testing.

mod adam;
mod bootstrap;
mod evaluate;
mod multitask;
mod sweep;
mod tasks;
mod train;

pub use adam::{adam_step, AdamState};
pub use bootstrap::{bootstrap_diff, exact_bootstrap_p};
pub use evaluate::{ci95, clip_logits, eval_seed, evaluate, window_lengths, Accuracy};
pub use multitask::{multitask_loss, multitask_loss_and_grad};
pub use sweep::{noise_sweep, sweep_variants, SweepOptions, SweepRow, SweepVariant};
pub use tasks::{TaskKind, TaskSpec, AM_CARRIER_HZ, AM_RATES_HZ, PITCH_HZ};
pub use train::{train, train_with, MetricsRow, Snapshot, StepReport, TrainConfig, TrainOutput, Trainer};
