//! Exact gradients of the classification loss with respect to every
//! learnable parameter, and a finite-difference oracle to check them.

mod engine;
mod finite_diff;
mod gradcheck;

pub use engine::{run_batch, BatchOutput, Example, GradScope, Prepared};
pub use finite_diff::{finite_diff, finite_diff_selected, rel_error};
pub use gradcheck::{grad_check_report, grad_check_report_with, GradCheckOptions, GradCheckRow, GRADCHECK_VARIANTS};

use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::model::MultiHead;
use crate::params::{Gradients, ParamSet};
use crate::signal::Waveform;

/// Mean softmax cross-entropy over the batch of a single-head model built
/// from `params`, and its gradient with respect to every entry of `params`.
pub fn loss_and_grad(batch: &[(Waveform, usize)], params: &ParamSet, cfg: &FrontendConfig) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let model = MultiHead::from_param_set(cfg, params)?;
    if model.num_tasks() != 1 {
        return Err(Error::InvalidArgument("loss_and_grad expects a single head".into()));
    }
    let examples: Vec<Example> = batch.iter().map(|(w, y)| Example::new(w.clone(), *y, 0)).collect();
    let out = run_batch(&model, &examples, GradScope::All)?;
    let b = batch.len() as f64;
    let mut grads = out.grads;
    grads.scale(1.0 / b);
    Ok((out.loss_sum / b, grads))
}

/// Loss only, for use as a finite-difference target.
pub fn loss_only(batch: &[(Waveform, usize)], params: &ParamSet, cfg: &FrontendConfig) -> Result<f64> {
    let model = MultiHead::from_param_set(cfg, params)?;
    let examples: Vec<Example> = batch.iter().map(|(w, y)| Example::new(w.clone(), *y, 0)).collect();
    let out = run_batch(&model, &examples, GradScope::None)?;
    Ok(out.loss_sum / batch.len() as f64)
}
