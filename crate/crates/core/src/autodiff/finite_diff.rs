use crate::error::{Error, Result};
use crate::params::{Gradients, ParamSet};

/// `|a − b| / max(1e−8, |a| + |b|)`.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Central differences `(L(θ+h) − L(θ−h)) / 2h` with `h = h_rel·max(1, |θ_i|)`
/// for every scalar in `params`.
pub fn finite_diff<F>(loss_fn: F, params: &ParamSet, h_rel: f64) -> Result<Gradients>
where
    F: Fn(&ParamSet) -> Result<f64>,
{
    let selection: Vec<(String, usize)> = params
        .iter()
        .flat_map(|(k, v)| (0..v.len()).map(move |i| (k.to_string(), i)))
        .collect();
    let values = finite_diff_selected(&loss_fn, params, h_rel, &selection)?;
    let mut out = params.zeros_like();
    for ((k, i), v) in selection.iter().zip(values) {
        out.get_mut(k).expect("selected key")[*i] = v;
    }
    Ok(out)
}

/// Central differences for the listed `(name, index)` entries only.
pub fn finite_diff_selected<F>(
    loss_fn: &F,
    params: &ParamSet,
    h_rel: f64,
    selection: &[(String, usize)],
) -> Result<Vec<f64>>
where
    F: Fn(&ParamSet) -> Result<f64>,
{
    if !(h_rel > 0.0) {
        return Err(Error::InvalidArgument(format!("h_rel must be positive, got {h_rel}")));
    }
    let mut work = params.clone();
    let mut out = Vec::with_capacity(selection.len());
    for (name, i) in selection {
        let theta = params.require(name)?[*i];
        let h = h_rel * theta.abs().max(1.0);
        work.get_mut(name).expect("present")[*i] = theta + h;
        let up = loss_fn(&work)?;
        work.get_mut(name).expect("present")[*i] = theta - h;
        let down = loss_fn(&work)?;
        work.get_mut(name).expect("present")[*i] = theta;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}
