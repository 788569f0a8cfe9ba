//! Forward pass with cached intermediates and the matching reverse pass.
//!
//! Adjoints are derived by hand per stage: linear head, time average,
//! log/PCEN (with backpropagation through the whole smoother recursion),
//! depthwise Gaussian pooling, the squared modulus of the complex filter
//! outputs, and finally the Gabor or raw-kernel parametrization.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frontend::{
    gabor_param_grads, log_backward, mel_power, pcen_backward, pcen_channel, Compression, FilterBankRef, FilterOutput,
    FilterParams, FilterPlan, PcenCache, PoolPlan, LOG_FLOOR,
};
use crate::model::{frontend_param_set, MultiHead};
use crate::params::{self, head_key, Gradients, ParamSet};
use crate::signal::Waveform;

/// One labelled clip and the task it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub wave: Waveform,
    pub label: usize,
    pub task: usize,
}

impl Example {
    pub fn new(wave: Waveform, label: usize, task: usize) -> Self {
        Example { wave, label, task }
    }
}

/// Which gradients to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradScope {
    None,
    HeadsOnly,
    All,
}

/// Per-batch results. `grads` is the sum over examples (empty when no
/// gradients were requested).
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub loss_sum: f64,
    pub losses: Vec<f64>,
    pub logits: Vec<Vec<f64>>,
    pub grads: Gradients,
}

impl BatchOutput {
    pub fn predictions(&self) -> Vec<usize> {
        self.logits.iter().map(|l| crate::gabor::argmax(l)).collect()
    }
}

/// Clip length and unscaled kernel-gradient spectra per channel.
type KernelSpectra = (usize, Vec<Vec<Complex64>>);

struct ExampleOut {
    loss: f64,
    logits: Vec<f64>,
    grads: ParamSet,
    kernel_spectra: Option<KernelSpectra>,
}

struct Cached {
    filter_out: Option<FilterOutput>,
    energy: Vec<Vec<f64>>,
    pooled: Vec<Vec<f64>>,
    compressed: Vec<Vec<f64>>,
    pcen: Vec<PcenCache>,
}

/// A model with its kernel spectra and pooling kernels computed once for a
/// set of clip lengths.
pub struct Prepared<'a> {
    model: &'a MultiHead,
    filter_plans: BTreeMap<usize, FilterPlan>,
    pool: Option<PoolPlan>,
}

impl<'a> Prepared<'a> {
    pub fn new(model: &'a MultiHead, lengths: impl IntoIterator<Item = usize>, with_derivs: bool) -> Result<Self> {
        let cfg = &model.cfg;
        let kernels = match &model.frontend.filters {
            FilterParams::Gabor(b) => Some(FilterBankRef::Gabor(b).complex_kernels()),
            FilterParams::Conv(b) => {
                if b.n_filters() != cfg.n_filters || b.filter_len() != cfg.filter_len {
                    return Err(Error::ShapeMismatch {
                        name: params::CONV_KERNELS.into(),
                        detail: "kernel bank does not match the configuration".into(),
                    });
                }
                Some(FilterBankRef::Conv(b).complex_kernels())
            }
            FilterParams::Mel(_) => None,
        };
        let mut filter_plans = BTreeMap::new();
        if let Some(k) = &kernels {
            for t in lengths {
                filter_plans.entry(t).or_insert_with(|| FilterPlan::new(k, t));
            }
        }
        let pool = model
            .frontend
            .pooling
            .as_ref()
            .map(|p| PoolPlan::new(p, cfg.pool_len, cfg.pool_stride, with_derivs));
        Ok(Prepared {
            model,
            filter_plans,
            pool,
        })
    }

    fn forward(&self, x: &Waveform) -> Result<Cached> {
        let cfg = &self.model.cfg;
        x.require_rate(cfg.sample_rate)?;
        let fp = &self.model.frontend;
        let (filter_out, energy, pooled) = match &fp.filters {
            FilterParams::Mel(mel) => (None, Vec::new(), mel_power(x, mel, cfg.pool_stride)?.channels()),
            _ => {
                let plan = self.filter_plans.get(&x.len()).ok_or_else(|| {
                    Error::InvalidArgument(format!("no filter plan prepared for {} samples", x.len()))
                })?;
                let out = plan.forward(x.samples());
                let energy = out.squared_modulus();
                let pool = self.pool.as_ref().expect("learnable filters come with pooling");
                let pooled = energy.iter().enumerate().map(|(n, e)| pool.forward(n, e)).collect();
                (Some(out), energy, pooled)
            }
        };
        let (compressed, pcen) = match cfg.compression {
            Compression::Log => (
                pooled
                    .iter()
                    .map(|ch: &Vec<f64>| ch.iter().map(|&v| (v + LOG_FLOOR).ln()).collect())
                    .collect(),
                Vec::new(),
            ),
            _ => {
                let p = fp.pcen.as_ref().expect("PCEN compression comes with parameters");
                pooled.iter().enumerate().map(|(n, ch)| pcen_channel(ch, p, n)).unzip()
            }
        };
        Ok(Cached {
            filter_out,
            energy,
            pooled,
            compressed,
            pcen,
        })
    }

    /// Time-averaged compressed features of one clip.
    pub fn embedding(&self, x: &Waveform) -> Result<Vec<f64>> {
        Ok(time_mean(&self.forward(x)?.compressed))
    }

    pub fn logits(&self, x: &Waveform, task: usize) -> Result<Vec<f64>> {
        let head = self.head(task)?;
        Ok(head.logits(&self.embedding(x)?))
    }

    fn head(&self, task: usize) -> Result<&crate::model::Head> {
        self.model.heads.get(task).ok_or(Error::UnknownTask {
            task,
            num_tasks: self.model.heads.len(),
        })
    }

    /// Zeroed gradient layout for a scope.
    fn grad_template(&self, scope: GradScope) -> ParamSet {
        let mut ps = match scope {
            GradScope::All => frontend_param_set(&self.model.frontend, &self.model.cfg),
            _ => ParamSet::new(),
        };
        if scope != GradScope::None {
            let k_total = self.model.heads.len();
            for (k, h) in self.model.heads.iter().enumerate() {
                ps.insert(head_key(params::HEAD_WEIGHTS, k, k_total), vec![0.0; h.weights.len()]);
                ps.insert(head_key(params::HEAD_BIAS, k, k_total), vec![0.0; h.bias.len()]);
            }
        }
        ps.zeros_like()
    }

    fn example(&self, ex: &Example, scope: GradScope) -> Result<ExampleOut> {
        let head = self.head(ex.task)?;
        if ex.label >= head.num_classes() {
            return Err(Error::InvalidArgument(format!(
                "label {} out of range for {} classes",
                ex.label,
                head.num_classes()
            )));
        }
        let cache = self.forward(&ex.wave)?;
        let z = time_mean(&cache.compressed);
        let logits = head.logits(&z);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let loss = max + sum_exp.ln() - logits[ex.label];
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let mut out = ExampleOut {
            loss,
            logits,
            grads: self.grad_template(scope),
            kernel_spectra: None,
        };
        if scope == GradScope::None {
            return Ok(out);
        }
        let (logits, grads) = (&out.logits, &mut out.grads);

        let n_feat = z.len();
        let mut dlogits: Vec<f64> = logits.iter().map(|l| (l - max).exp() / sum_exp).collect();
        dlogits[ex.label] -= 1.0;
        let k_total = self.model.heads.len();
        {
            let gw = grads
                .get_mut(&head_key(params::HEAD_WEIGHTS, ex.task, k_total))
                .expect("head key");
            for (c, &d) in dlogits.iter().enumerate() {
                for (g, zn) in gw[c * n_feat..(c + 1) * n_feat].iter_mut().zip(&z) {
                    *g = d * zn;
                }
            }
        }
        grads
            .get_mut(&head_key(params::HEAD_BIAS, ex.task, k_total))
            .expect("head key")
            .copy_from_slice(&dlogits);
        if scope == GradScope::HeadsOnly {
            return Ok(out);
        }

        // ∂loss/∂z, then through the time average.
        let mut dz = vec![0.0; n_feat];
        for (c, &d) in dlogits.iter().enumerate() {
            for (g, w) in dz.iter_mut().zip(&head.weights[c * n_feat..(c + 1) * n_feat]) {
                *g += d * w;
            }
        }
        out.kernel_spectra = self.backward_frontend(&cache, &dz, &mut out.grads)?;
        Ok(out)
    }

    /// Accumulates every frontend gradient except the filter taps, whose
    /// unscaled spectra are returned for batch-level summation.
    fn backward_frontend(&self, cache: &Cached, dz: &[f64], grads: &mut ParamSet) -> Result<Option<KernelSpectra>> {
        let cfg = &self.model.cfg;
        let fp = &self.model.frontend;
        let n_frames = cache.compressed.first().map_or(1, Vec::len);
        let n_ch = dz.len();

        let mut d_pooled = Vec::with_capacity(n_ch);
        match cfg.compression {
            Compression::Log => {
                for (n, pooled) in cache.pooled.iter().enumerate() {
                    let g = vec![dz[n] / n_frames as f64; n_frames];
                    d_pooled.push(log_backward(pooled, &g));
                }
            }
            _ => {
                let p = fp.pcen.as_ref().expect("PCEN parameters");
                let mut ga = vec![0.0; n_ch];
                let mut gd = vec![0.0; n_ch];
                let mut gr = vec![0.0; n_ch];
                let mut gs = vec![0.0; n_ch];
                for (n, pooled) in cache.pooled.iter().enumerate() {
                    let g = vec![dz[n] / n_frames as f64; n_frames];
                    let (df, pg) = pcen_backward(pooled, &cache.pcen[n], p, n, &g);
                    d_pooled.push(df);
                    ga[n] = pg.alpha;
                    gd[n] = pg.delta;
                    gr[n] = pg.root;
                    gs[n] = pg.smooth;
                }
                grads.insert(params::PCEN_ALPHA, ga);
                grads.insert(params::PCEN_DELTA, gd);
                grads.insert(params::PCEN_ROOT, gr);
                if cfg.compression == Compression::Spcen {
                    grads.insert(params::PCEN_SMOOTH, gs);
                }
            }
        }

        let (Some(filter_out), Some(pool)) = (&cache.filter_out, &self.pool) else {
            return Ok(None);
        };
        let mut d_energy = Vec::with_capacity(n_ch);
        let mut d_width = Vec::with_capacity(n_ch);
        for (n, e) in cache.energy.iter().enumerate() {
            let (gx, gw) = pool.backward(n, e, &d_pooled[n]);
            d_energy.push(gx);
            d_width.push(gw);
        }
        grads.insert(params::POOL_WIDTHS, d_width);

        let t_len = cache.energy[0].len();
        let spectra = self.filter_plans[&t_len].backward_spectra(filter_out, &d_energy);
        Ok(Some((t_len, spectra)))
    }

    /// Turn summed tap spectra into Gabor or raw-kernel gradients.
    fn filter_grads(&self, spectra: BTreeMap<usize, Vec<Vec<Complex64>>>, grads: &mut ParamSet) -> Result<()> {
        let n_ch = self.model.cfg.n_filters;
        let w = self.model.cfg.filter_len;
        let mut dk = vec![vec![Complex64::new(0.0, 0.0); w]; n_ch];
        for (t_len, s) in spectra {
            for (acc, g) in dk.iter_mut().zip(self.filter_plans[&t_len].kernel_grads(s)) {
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += v;
                }
            }
        }
        match &self.model.frontend.filters {
            FilterParams::Gabor(bank) => {
                let (de, ds) = gabor_param_grads(bank, &dk);
                grads.insert(params::ETA, de);
                grads.insert(params::SIGMA, ds);
            }
            FilterParams::Conv(_) => {
                let mut flat = Vec::with_capacity(2 * n_ch * w);
                for ch in &dk {
                    flat.extend(ch.iter().map(|c| c.re));
                    flat.extend(ch.iter().map(|c| c.im));
                }
                grads.insert(params::CONV_KERNELS, flat);
            }
            FilterParams::Mel(_) => {}
        }
        Ok(())
    }

    /// Losses, logits and summed gradients over a batch. Examples are
    /// processed in parallel in fixed-size groups; the reduction runs in
    /// batch order.
    pub fn batch(&self, batch: &[Example], scope: GradScope) -> Result<BatchOutput> {
        let mut grads = self.grad_template(scope);
        let mut spectra: BTreeMap<usize, Vec<Vec<Complex64>>> = BTreeMap::new();
        let mut loss_sum = 0.0;
        let mut losses = Vec::with_capacity(batch.len());
        let mut logits = Vec::with_capacity(batch.len());
        let group = rayon::current_num_threads().max(1);
        for chunk in batch.chunks(group) {
            let outs: Vec<ExampleOut> = chunk
                .par_iter()
                .map(|ex| self.example(ex, scope))
                .collect::<Result<_>>()?;
            for out in outs {
                loss_sum += out.loss;
                losses.push(out.loss);
                logits.push(out.logits);
                grads.add_scaled(&out.grads, 1.0)?;
                if let Some((t_len, s)) = out.kernel_spectra {
                    match spectra.get_mut(&t_len) {
                        Some(acc) => {
                            for (a_ch, s_ch) in acc.iter_mut().zip(&s) {
                                for (a, v) in a_ch.iter_mut().zip(s_ch) {
                                    *a += v;
                                }
                            }
                        }
                        None => {
                            spectra.insert(t_len, s);
                        }
                    }
                }
            }
        }
        if !spectra.is_empty() {
            self.filter_grads(spectra, &mut grads)?;
        }
        if !grads.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        Ok(BatchOutput {
            loss_sum,
            losses,
            logits,
            grads,
        })
    }
}

fn time_mean(channels: &[Vec<f64>]) -> Vec<f64> {
    channels
        .iter()
        .map(|ch| ch.iter().sum::<f64>() / ch.len().max(1) as f64)
        .collect()
}

/// Evaluate a whole batch for `model`, preparing plans for every clip
/// length present.
pub fn run_batch(model: &MultiHead, batch: &[Example], scope: GradScope) -> Result<BatchOutput> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let prepared = Prepared::new(model, batch.iter().map(|e| e.wave.len()), scope == GradScope::All)?;
    prepared.batch(batch, scope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{Filtering, FrontendConfig};
    use crate::params::is_head_key;
    use crate::rng::Gaussian;

    fn cfg() -> FrontendConfig {
        FrontendConfig {
            n_filters: 5,
            filter_len: 33,
            pool_len: 17,
            pool_stride: 8,
            ..FrontendConfig::default()
        }
    }

    fn noise(len: usize, seed: u64) -> Waveform {
        Waveform::new(Gaussian::from_seed(seed).fill(len), 16000).unwrap()
    }

    fn batch() -> Vec<Example> {
        (0..4)
            .map(|i| Example::new(noise(300 + 40 * i, i as u64), i % 3, 0))
            .collect()
    }

    #[test]
    fn zero_heads_give_uniform_softmax() {
        let model = MultiHead::init(&cfg(), &[3]).unwrap();
        let out = run_batch(&model, &batch(), GradScope::All).unwrap();
        for l in &out.losses {
            assert!((l - 3f64.ln()).abs() < 1e-12);
        }
        let gb = out.grads.get(params::HEAD_BIAS).unwrap();
        assert!(gb.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn scopes_select_gradient_groups() {
        let model = MultiHead::init(&cfg(), &[3]).unwrap();
        let none = run_batch(&model, &batch(), GradScope::None).unwrap();
        assert!(none.grads.is_empty());
        let heads = run_batch(&model, &batch(), GradScope::HeadsOnly).unwrap();
        assert!(heads.grads.names().all(is_head_key));
        let all = run_batch(&model, &batch(), GradScope::All).unwrap();
        assert_eq!(all.grads.len(), model.to_param_set().len());
        assert_eq!(heads.grads.get(params::HEAD_BIAS), all.grads.get(params::HEAD_BIAS));
        assert_eq!(none.loss_sum, all.loss_sum);
    }

    #[test]
    fn duplicated_batch_doubles_sum() {
        let mut model = MultiHead::init(&cfg(), &[3]).unwrap();
        let mut g = Gaussian::from_seed(5);
        model.heads[0].weights = g.fill(15);
        let b = batch();
        let once = run_batch(&model, &b, GradScope::All).unwrap();
        let twice: Vec<Example> = b.iter().chain(b.iter()).cloned().collect();
        let twice = run_batch(&model, &twice, GradScope::All).unwrap();
        assert!((twice.loss_sum - 2.0 * once.loss_sum).abs() < 1e-9);
        for (name, v) in once.grads.iter() {
            for (a, b) in v.iter().zip(twice.grads.get(name).unwrap()) {
                assert!((2.0 * a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let mut model = MultiHead::init(&cfg(), &[3]).unwrap();
        model.heads[0].weights = Gaussian::from_seed(2).fill(15);
        let a = run_batch(&model, &batch(), GradScope::All).unwrap();
        let b = run_batch(&model, &batch(), GradScope::All).unwrap();
        assert_eq!(a.loss_sum.to_bits(), b.loss_sum.to_bits());
        assert_eq!(a.grads, b.grads);
    }

    #[test]
    fn logits_match_batch_output() {
        let mut model = MultiHead::init(&cfg(), &[2, 3]).unwrap();
        model.heads[1].weights = Gaussian::from_seed(9).fill(15);
        let ex = Example::new(noise(500, 1), 2, 1);
        let prepared = Prepared::new(&model, [500], false).unwrap();
        let direct = prepared.logits(&ex.wave, 1).unwrap();
        let out = prepared.batch(std::slice::from_ref(&ex), GradScope::None).unwrap();
        assert_eq!(direct, out.logits[0]);
        assert!(matches!(prepared.logits(&ex.wave, 2), Err(Error::UnknownTask { .. })));
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let model = MultiHead::init(&cfg(), &[3]).unwrap();
        let ex = Example::new(noise(200, 0), 3, 0);
        assert!(run_batch(&model, &[ex], GradScope::None).is_err());
    }

    #[test]
    fn mel_log_has_only_head_gradients() {
        let c = cfg().with_variant(Filtering::Mel, Compression::Log);
        let model = MultiHead::init(&c, &[3]).unwrap();
        let out = run_batch(&model, &batch(), GradScope::All).unwrap();
        assert!(out.grads.names().all(is_head_key));
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let model = MultiHead::init(&cfg(), &[3]).unwrap();
        let ex = Example::new(Waveform::new(vec![0.1; 300], 8000).unwrap(), 0, 0);
        assert!(matches!(
            run_batch(&model, &[ex], GradScope::None),
            Err(Error::BadRate { .. })
        ));
    }

    fn repeat(b: &[Example], k: usize) -> Vec<Example> {
        (0..k).flat_map(|_| b.iter().cloned()).collect()
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(6))]

        #[test]
        fn gradient_is_linear_in_the_loss(a in 1usize..4, b in 1usize..4, seed in 0u64..1000) {
            let mut model = MultiHead::init(&cfg(), &[3]).unwrap();
            model.heads[0].weights = Gaussian::from_seed(seed).fill(15);
            let all = batch();
            let (b1, b2) = all.split_at(2);
            let g1 = run_batch(&model, b1, GradScope::All).unwrap();
            let g2 = run_batch(&model, b2, GradScope::All).unwrap();
            let mixed: Vec<Example> = repeat(b1, a).into_iter().chain(repeat(b2, b)).collect();
            let g = run_batch(&model, &mixed, GradScope::All).unwrap();
            for (name, v) in g.grads.iter() {
                let (u, w) = (g1.grads.get(name).unwrap(), g2.grads.get(name).unwrap());
                for i in 0..v.len() {
                    let want = a as f64 * u[i] + b as f64 * w[i];
                    proptest::prop_assert!((v[i] - want).abs() <= 1e-9 * (1.0 + want.abs()), "{name}[{i}]");
                }
            }
            proptest::prop_assert!(g.grads.is_finite());
        }
    }
}
