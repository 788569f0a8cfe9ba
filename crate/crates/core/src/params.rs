//! Named parameter vectors shared by the model, the gradient engine, the
//! optimizer and the snapshot format.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const ETA: &str = "eta";
pub const SIGMA: &str = "sigma";
pub const POOL_WIDTHS: &str = "pool_widths";
pub const PCEN_ALPHA: &str = "pcen_alpha";
pub const PCEN_DELTA: &str = "pcen_delta";
pub const PCEN_ROOT: &str = "pcen_root";
pub const PCEN_SMOOTH: &str = "pcen_smooth";
pub const CONV_KERNELS: &str = "conv_kernels";
pub const HEAD_WEIGHTS: &str = "head_weights";
pub const HEAD_BIAS: &str = "head_bias";

/// Key of head `k` in a model with `num_heads` heads. A single head uses the
/// bare names; several heads are suffixed `.k`.
pub fn head_key(base: &str, k: usize, num_heads: usize) -> String {
    if num_heads == 1 {
        base.to_string()
    } else {
        format!("{base}.{k}")
    }
}

/// Parameter group of a key (`head_weights.1` → `head_weights`).
pub fn group_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

pub fn is_head_key(name: &str) -> bool {
    matches!(group_of(name), HEAD_WEIGHTS | HEAD_BIAS)
}

/// Ordered map from parameter name to values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: BTreeMap<String, Vec<f64>>,
}

/// Gradients share the keyed layout of the parameters they belong to.
pub type Gradients = ParamSet;

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.entries.insert(name.into(), values);
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.entries.get(name).map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.entries.get_mut(name)
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.get(name).ok_or_else(|| Error::ShapeMismatch {
            name: name.to_string(),
            detail: "missing parameter".into(),
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Vec<f64>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars.
    pub fn n_values(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), vec![0.0; v.len()]))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().flatten().all(|v| v.is_finite())
    }

    /// Fails unless `other` has exactly the same keys and lengths.
    pub fn check_congruent(&self, other: &ParamSet) -> Result<()> {
        for (k, v) in &self.entries {
            match other.entries.get(k) {
                Some(o) if o.len() == v.len() => {}
                Some(o) => {
                    return Err(Error::ShapeMismatch {
                        name: k.clone(),
                        detail: format!("{} vs {} values", v.len(), o.len()),
                    })
                }
                None => {
                    return Err(Error::ShapeMismatch {
                        name: k.clone(),
                        detail: "missing in other set".into(),
                    })
                }
            }
        }
        if let Some(k) = other.entries.keys().find(|k| !self.entries.contains_key(*k)) {
            return Err(Error::ShapeMismatch {
                name: k.clone(),
                detail: "unexpected key".into(),
            });
        }
        Ok(())
    }

    /// `self += scale · other` over congruent sets.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) -> Result<()> {
        self.check_congruent(other)?;
        for (k, v) in self.entries.iter_mut() {
            for (a, b) in v.iter_mut().zip(&other.entries[k]) {
                *a += scale * b;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.entries.values_mut().flatten() {
            *v *= factor;
        }
    }

    /// Drop every key for which `keep` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|k, _| keep(k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_keys_and_groups() {
        assert_eq!(head_key(HEAD_WEIGHTS, 0, 1), "head_weights");
        assert_eq!(head_key(HEAD_BIAS, 1, 2), "head_bias.1");
        assert_eq!(group_of("head_bias.1"), "head_bias");
        assert!(is_head_key("head_weights.3"));
        assert!(!is_head_key(ETA));
    }

    #[test]
    fn congruence_and_axpy() {
        let mut a = ParamSet::new();
        a.insert("x", vec![1.0, 2.0]);
        let mut b = a.zeros_like();
        b.get_mut("x").unwrap()[1] = 4.0;
        a.add_scaled(&b, 0.5).unwrap();
        assert_eq!(a.get("x").unwrap(), &[1.0, 4.0]);
        b.insert("y", vec![0.0]);
        assert!(a.add_scaled(&b, 1.0).is_err());
    }
}
