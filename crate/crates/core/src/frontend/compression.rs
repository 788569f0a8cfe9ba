//! Log compression and per-channel energy normalization (PCEN).
//!
//! `PCEN(F)(t,n) = (F(t,n) / (ε + M(t,n))^α_n + δ_n)^(1/ρ_n) − δ_n^(1/ρ_n)`
//! with the smoother `M(t,n) = (1 − s_n)·M(t−1,n) + s_n·F(t,n)` started at
//! `M(0,n) = F(0,n)`. The learned exponent is parametrized by its root `ρ_n`.

use crate::error::{Error, Result};
use crate::frontend::FeatureMap;

/// Additive floor inside the logarithm.
pub const LOG_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PcenParams {
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub root: Vec<f64>,
    pub smooth: Vec<f64>,
    pub eps: f64,
}

impl PcenParams {
    pub const INIT_ALPHA: f64 = 0.96;
    pub const INIT_DELTA: f64 = 2.0;
    pub const INIT_ROOT: f64 = 2.0;
    pub const INIT_SMOOTH: f64 = 0.04;
    pub const EPS: f64 = 1e-6;

    pub fn init(n: usize) -> Self {
        PcenParams {
            alpha: vec![Self::INIT_ALPHA; n],
            delta: vec![Self::INIT_DELTA; n],
            root: vec![Self::INIT_ROOT; n],
            smooth: vec![Self::INIT_SMOOTH; n],
            eps: Self::EPS,
        }
    }

    /// Same coefficients for every channel.
    pub fn uniform(n: usize, alpha: f64, delta: f64, root: f64, smooth: f64, eps: f64) -> Self {
        PcenParams {
            alpha: vec![alpha; n],
            delta: vec![delta; n],
            root: vec![root; n],
            smooth: vec![smooth; n],
            eps,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.alpha.len()
    }

    /// Clamp into α ∈ [0,1], δ ≥ 0, ρ ≥ 1, s ∈ [0,1].
    pub fn project(&self) -> Self {
        let clip = |v: &[f64], lo: f64, hi: f64| -> Vec<f64> {
            v.iter()
                .map(|&x| if x.is_nan() { lo } else { x.clamp(lo, hi) })
                .collect()
        };
        PcenParams {
            alpha: clip(&self.alpha, 0.0, 1.0),
            delta: clip(&self.delta, 0.0, f64::MAX),
            root: clip(&self.root, 1.0, f64::MAX),
            smooth: clip(&self.smooth, 0.0, 1.0),
            eps: self.eps,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        let lens = [self.alpha.len(), self.delta.len(), self.root.len(), self.smooth.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::ShapeMismatch {
                name: "pcen".into(),
                detail: format!("parameter lengths {lens:?} for {n} channels"),
            });
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig("PCEN eps must be positive".into()));
        }
        Ok(())
    }
}

fn require_non_negative(f: &FeatureMap) -> Result<()> {
    if f.values().iter().any(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeInput);
    }
    Ok(())
}

/// Elementwise `ln(x + 1e−6)`.
pub fn log_compress(f: &FeatureMap) -> Result<FeatureMap> {
    require_non_negative(f)?;
    Ok(f.map(|v| (v + LOG_FLOOR).ln()))
}

pub(crate) fn log_backward(f: &[f64], grad_out: &[f64]) -> Vec<f64> {
    f.iter().zip(grad_out).map(|(&x, &g)| g / (x + LOG_FLOOR)).collect()
}

pub fn pcen_forward(f: &FeatureMap, p: &PcenParams) -> Result<FeatureMap> {
    require_non_negative(f)?;
    p.check(f.n_channels())?;
    let channels: Vec<Vec<f64>> = f
        .channels()
        .iter()
        .enumerate()
        .map(|(n, x)| pcen_channel(x, p, n).0)
        .collect();
    Ok(FeatureMap::from_channels(&channels, f.frame_rate()))
}

/// Smoother states kept for the backward pass.
pub(crate) struct PcenCache {
    pub(crate) ema: Vec<f64>,
}

pub(crate) fn pcen_channel(f: &[f64], p: &PcenParams, n: usize) -> (Vec<f64>, PcenCache) {
    let (alpha, delta, s) = (p.alpha[n], p.delta[n], p.smooth[n]);
    let r = 1.0 / p.root[n];
    let offset = delta.powf(r);
    let mut ema = Vec::with_capacity(f.len());
    let mut out = Vec::with_capacity(f.len());
    let mut m = f.first().copied().unwrap_or(0.0);
    for (t, &x) in f.iter().enumerate() {
        if t > 0 {
            m = (1.0 - s) * m + s * x;
        }
        ema.push(m);
        out.push((x / (p.eps + m).powf(alpha) + delta).powf(r) - offset);
    }
    (out, PcenCache { ema })
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct PcenGrads {
    pub alpha: f64,
    pub delta: f64,
    pub root: f64,
    pub smooth: f64,
}

/// Reverse pass through one channel, including backpropagation through the
/// full smoother recursion. Returns `∂loss/∂F` and the parameter gradients.
pub(crate) fn pcen_backward(
    f: &[f64],
    cache: &PcenCache,
    p: &PcenParams,
    n: usize,
    grad_out: &[f64],
) -> (Vec<f64>, PcenGrads) {
    let (alpha, delta, s, root) = (p.alpha[n], p.delta[n], p.smooth[n], p.root[n]);
    let r = 1.0 / root;
    let mut g = PcenGrads::default();
    let mut grad_f = vec![0.0; f.len()];
    let mut grad_m_direct = vec![0.0; f.len()];

    let delta_r = delta.powf(r);
    let delta_term = if delta > 0.0 { delta_r * delta.ln() } else { 0.0 };
    let d_offset_d_delta = if delta > 0.0 { r * delta.powf(r - 1.0) } else { 0.0 };
    let mut dy_dr_sum = 0.0;

    for t in 0..f.len() {
        let gy = grad_out[t];
        let d = p.eps + cache.ema[t];
        let d_alpha = d.powf(alpha);
        let q = f[t] / d_alpha;
        let u = q + delta;
        let (dy_du, u_term) = if u > 0.0 {
            (r * u.powf(r - 1.0), u.powf(r) * u.ln())
        } else {
            (0.0, 0.0)
        };
        let gu = gy * dy_du;
        grad_f[t] = gu / d_alpha;
        grad_m_direct[t] = -gu * alpha * q / d;
        g.alpha -= gu * q * d.ln();
        g.delta += gu - gy * d_offset_d_delta;
        dy_dr_sum += gy * (u_term - delta_term);
    }
    g.root = -dy_dr_sum / (root * root);

    // Adjoint of the smoother, walked backwards in time.
    let mut carry = 0.0;
    for t in (0..f.len()).rev() {
        let total = grad_m_direct[t] + carry;
        if t > 0 {
            grad_f[t] += s * total;
            g.smooth += total * (f[t] - cache.ema[t - 1]);
            carry = (1.0 - s) * total;
        } else {
            grad_f[0] += total;
        }
    }
    (grad_f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(values: Vec<f64>, n: usize) -> FeatureMap {
        FeatureMap::new(values.len() / n, n, values, 100.0).unwrap()
    }

    #[test]
    fn log_values() {
        let f = map(vec![0.0, 1.0 - 1e-6], 2);
        let y = log_compress(&f).unwrap();
        assert!((y.values()[0] - (-13.815_510_557_964_274)).abs() < 1e-12);
        assert!(y.values()[1].abs() < 1e-9);
        assert!(matches!(log_compress(&map(vec![-1.0], 1)), Err(Error::NegativeInput)));
    }

    #[test]
    fn pcen_identity_parameters() {
        let f = map((0..20).map(|i| i as f64 * 0.37).collect(), 2);
        let p = PcenParams::uniform(2, 0.0, 0.0, 1.0, 0.04, 1e-6);
        assert_eq!(pcen_forward(&f, &p).unwrap(), f);
    }

    #[test]
    fn pcen_zero_input() {
        let f = map(vec![0.0; 30], 3);
        let y = pcen_forward(&f, &PcenParams::init(3)).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pcen_constant_closed_form() {
        let f = map(vec![1.0; 50], 1);
        let y = pcen_forward(&f, &PcenParams::uniform(1, 0.96, 2.0, 2.0, 0.04, 1e-6)).unwrap();
        // Closed form evaluated independently in arbitrary precision.
        let want = 0.317_836_968_068;
        assert!(((1.0 / (1.0f64 + 1e-6).powf(0.96) + 2.0).sqrt() - 2f64.sqrt() - want).abs() < 1e-12);
        for v in y.values() {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_ranges() {
        let p = PcenParams {
            alpha: vec![1.5, -0.1],
            delta: vec![-1.0, 3.0],
            root: vec![0.5, 2.5],
            smooth: vec![2.0, f64::NAN],
            eps: 1e-6,
        }
        .project();
        assert_eq!(p.alpha, vec![1.0, 0.0]);
        assert_eq!(p.delta, vec![0.0, 3.0]);
        assert_eq!(p.root, vec![1.0, 2.5]);
        assert_eq!(p.smooth, vec![1.0, 0.0]);
    }

    fn pcen_strategy(n: usize) -> impl Strategy<Value = PcenParams> {
        (
            prop::collection::vec(0.0f64..0.999, n),
            prop::collection::vec(0.0f64..4.0, n),
            prop::collection::vec(1.0f64..4.0, n),
            prop::collection::vec(0.001f64..1.0, n),
        )
            .prop_map(|(alpha, delta, root, smooth)| PcenParams {
                alpha,
                delta,
                root,
                smooth,
                eps: 1e-6,
            })
    }

    proptest! {
        #[test]
        fn pcen_monotone_under_scaling(
            values in prop::collection::vec(0.0f64..10.0, 24),
            p in pcen_strategy(3),
            lambda in 1.0f64..100.0,
        ) {
            let f = map(values.clone(), 3);
            let g = map(values.iter().map(|v| v * lambda).collect(), 3);
            let (a, b) = (pcen_forward(&f, &p).unwrap(), pcen_forward(&g, &p).unwrap());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!(*y >= x - 1e-12 * x.abs().max(1.0), "{x} > {y}");
            }
        }

        #[test]
        fn compression_is_finite(
            values in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e-300, 0.0f64..1e300, Just(f64::MAX)], 12),
            p in pcen_strategy(2),
        ) {
            let f = map(values, 2);
            prop_assert!(log_compress(&f).unwrap().values().iter().all(|v| v.is_finite()));
            prop_assert!(pcen_forward(&f, &p).unwrap().values().iter().all(|v| v.is_finite()));
        }
    }
}
