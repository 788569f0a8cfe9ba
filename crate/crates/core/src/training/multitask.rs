use crate::autodiff::{run_batch, Example, GradScope};
use crate::error::{Error, Result};
use crate::model::MultiHead;
use crate::params::Gradients;

fn check_tasks(batch: &[Example], model: &MultiHead) -> Result<()> {
    match batch.iter().find(|e| e.task >= model.num_tasks()) {
        Some(e) => Err(Error::UnknownTask {
            task: e.task,
            num_tasks: model.num_tasks(),
        }),
        None => Ok(()),
    }
}

/// Sum over examples of the cross-entropy of each example's own task head.
pub fn multitask_loss(batch: &[Example], model: &MultiHead) -> Result<f64> {
    check_tasks(batch, model)?;
    Ok(run_batch(model, batch, GradScope::None)?.loss_sum)
}

/// [`multitask_loss`] and its gradient. Heads of tasks absent from the
/// batch receive exactly zero gradient.
pub fn multitask_loss_and_grad(batch: &[Example], model: &MultiHead) -> Result<(f64, Gradients)> {
    check_tasks(batch, model)?;
    let out = run_batch(model, batch, GradScope::All)?;
    Ok((out.loss_sum, out.grads))
}
