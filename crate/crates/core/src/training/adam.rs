use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::model::project_param_set;
use crate::params::{Gradients, ParamSet};

/// First and second moment estimates plus hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: ParamSet,
    pub second_moment: ParamSet,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(params: &ParamSet, lr: f64) -> Self {
        AdamState {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
            lr,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps_adam: Self::EPS,
        }
    }
}

/// One bias-corrected ADAM update. Entries of `params` without a gradient
/// are left alone. With `cfg`, the result is projected back into every
/// module's valid range.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ParamSet,
    grads: &Gradients,
    cfg: Option<&FrontendConfig>,
) -> Result<()> {
    for (name, g) in grads.iter() {
        let p = params.require(name)?;
        let m = state.first_moment.require(name)?;
        if p.len() != g.len() || m.len() != g.len() {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                detail: format!("{} parameters, {} gradients", p.len(), g.len()),
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (name, g) in grads.iter() {
        let m = state.first_moment.get_mut(name).expect("checked");
        let v = state.second_moment.get_mut(name).expect("checked");
        let p = params.get_mut(name).expect("checked");
        for i in 0..g.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            p[i] -= state.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + state.eps_adam);
        }
    }
    if let Some(cfg) = cfg {
        project_param_set(params, cfg)?;
    }
    Ok(())
}
