use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use leaf_core::autodiff::{grad_check_report_with, GradCheckOptions, GradCheckRow, GRADCHECK_VARIANTS};
use leaf_core::frontend::FilterParams;
use leaf_core::gabor::fwhm_from_sigma;
use leaf_core::io::{load_snapshot, save_snapshot, write_features};
use leaf_core::model::frontend_from_param_set;
use leaf_core::signal::load_wav;
use leaf_core::training::{
    self, bootstrap_diff, evaluate, sweep_variants, MetricsRow, SweepOptions, SweepRow, TaskKind, TaskSpec, TrainConfig,
};
use leaf_core::{
    frontend_forward, mel_equivalence, param_count, Error, FrontendConfig, FrontendParams, MultiHead, Result,
};

use crate::{
    BootstrapArgs, EvalArgs, ExtractArgs, FrontendArgs, GradcheckArgs, InspectArgs, NoiseSweepArgs, TrainArgs,
};

pub const METRICS_FILE: &str = "metrics.csv";

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

/// Writes `text` to `path` when given, else to `out`.
fn emit(path: Option<&Path>, out: &mut dyn Write, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(io_err),
        None => out.write_all(text.as_bytes()).map_err(io_err),
    }
}

/// Configuration and frontend parameters from a snapshot, or the mel
/// initialization of the flag-selected configuration.
fn frontend_state(snapshot: Option<&PathBuf>, args: &FrontendArgs) -> Result<(FrontendConfig, FrontendParams)> {
    match snapshot {
        Some(dir) => {
            let (cfg, ps) = load_snapshot(dir)?;
            let params = frontend_from_param_set(&cfg, &ps)?;
            Ok((cfg, params))
        }
        None => {
            let cfg = args.resolve()?;
            let params = FrontendParams::init(&cfg)?;
            Ok((cfg, params))
        }
    }
}

fn task_specs(kinds: &[TaskKind], snr_db: f64) -> Vec<TaskSpec> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| TaskSpec::new(i, k, snr_db))
        .collect()
}

pub fn extract(args: &ExtractArgs, out: &mut dyn Write) -> Result<()> {
    let x = load_wav(&args.input)?;
    let (cfg, params) = frontend_state(args.snapshot.as_ref(), &args.frontend)?;
    let features = frontend_forward(&x, &params, &cfg)?;
    write_features(&args.out, &features)?;
    writeln!(out, "param_count={}", param_count(&cfg)).map_err(io_err)?;
    if args.compare {
        let corr = mel_equivalence(&x, &cfg)?;
        writeln!(out, "channel,correlation").map_err(io_err)?;
        for (n, c) in corr.iter().enumerate() {
            writeln!(out, "{n},{c}").map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.frontend.resolve()?;
    let tasks = task_specs(&args.task, args.snr_db);
    let tc = TrainConfig {
        steps: args.steps,
        batch_size: args.batch,
        lr: args.lr,
        seed: args.seed,
        log_every: args.log_every,
        freeze_frontend: args.freeze_frontend,
    };
    let result = training::train(&tasks, &cfg, &tc)?;
    std::fs::create_dir_all(&args.out).map_err(io_err)?;
    let mut csv = String::from(MetricsRow::CSV_HEADER);
    csv.push('\n');
    for row in &result.metrics {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    std::fs::write(args.out.join(METRICS_FILE), csv).map_err(io_err)?;
    for snap in &result.snapshots {
        let dir = args.out.join(format!("step_{}", snap.step));
        save_snapshot(&dir, &cfg, &snap.params)?;
        writeln!(out, "{}", dir.display()).map_err(io_err)?;
    }
    Ok(())
}

pub fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (cfg, ps) = load_snapshot(&args.snapshot)?;
    let model = MultiHead::from_param_set(&cfg, &ps)?;
    let tasks = task_specs(&args.task, args.snr_db);
    if tasks.len() != model.num_tasks() {
        return Err(Error::InvalidArgument(format!(
            "{} tasks given for a model with {} heads",
            tasks.len(),
            model.num_tasks()
        )));
    }
    let mut csv = String::from("task_id,task,accuracy,ci95,n\n");
    for t in &tasks {
        let acc = evaluate(&model, t, args.n, args.seed)?;
        let _ = writeln!(csv, "{},{},{},{},{}", t.task_id, t.kind, acc.accuracy, acc.ci95, acc.n);
    }
    emit(None, out, &csv)
}

pub fn gradcheck(args: &GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.frontend.resolve()?;
    let variants = match args.frontend.frontend {
        Some(kind) => vec![kind.variant()],
        None => GRADCHECK_VARIANTS.to_vec(),
    };
    let opts = GradCheckOptions {
        clip_len: args.clip_len,
        h_rel: args.h_rel,
        max_params_per_group: (args.max_per_group > 0).then_some(args.max_per_group),
        variants,
        ..GradCheckOptions::default()
    };
    let rows = grad_check_report_with(&cfg, args.seed, &opts)?;
    let mut csv = String::from(GradCheckRow::CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    emit(args.out.as_deref(), out, &csv)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn inspect(args: &InspectArgs, out: &mut dyn Write) -> Result<()> {
    let (cfg, params) = frontend_state(args.snapshot.as_ref(), &args.frontend)?;
    let rate = cfg.sample_rate as f64;
    let n = cfg.n_filters;
    let (centers, sigmas): (Vec<Option<f64>>, Vec<Option<f64>>) = match &params.filters {
        FilterParams::Gabor(b) => (
            b.center_freqs.iter().map(|&e| Some(e * rate)).collect(),
            b.inv_bandwidths.iter().map(|&s| Some(s)).collect(),
        ),
        FilterParams::Mel(m) => (
            m.peak_bins()
                .iter()
                .map(|&k| Some(k as f64 * rate / m.n_fft() as f64))
                .collect(),
            vec![None; n],
        ),
        FilterParams::Conv(_) => (vec![None; n], vec![None; n]),
    };
    let mut csv = String::new();
    if args.bank {
        csv.push_str("channel,center_hz,sigma,fwhm\n");
        for c in 0..n {
            // Half-maximum width of the magnitude response, in Hz.
            let fwhm = sigmas[c].map(|s| fwhm_from_sigma(s) * rate / std::f64::consts::TAU);
            let _ = writeln!(csv, "{c},{},{},{}", opt(centers[c]), opt(sigmas[c]), opt(fwhm));
        }
    } else {
        csv.push_str("channel,center_hz,sigma,pool_width,alpha,delta,root,smooth\n");
        for c in 0..n {
            let width = params.pooling.as_ref().map(|p| p.widths[c]);
            let pcen = params.pcen.as_ref();
            let _ = writeln!(
                csv,
                "{c},{},{},{},{},{},{},{}",
                opt(centers[c]),
                opt(sigmas[c]),
                opt(width),
                opt(pcen.map(|p| p.alpha[c])),
                opt(pcen.map(|p| p.delta[c])),
                opt(pcen.map(|p| p.root[c])),
                opt(pcen.map(|p| p.smooth[c])),
            );
        }
    }
    emit(args.out.as_deref(), out, &csv)
}

pub fn bootstrap(args: &BootstrapArgs, out: &mut dyn Write) -> Result<()> {
    let (mean_diff, p) = bootstrap_diff(&args.a, &args.b, args.iters, args.seed)?;
    emit(None, out, &format!("mean_diff,p_value\n{mean_diff},{p}\n"))
}

pub fn noise_sweep(args: &NoiseSweepArgs, out: &mut dyn Write) -> Result<()> {
    let base = args.frontend.resolve()?;
    let mut variants = sweep_variants(&base);
    if !args.variant.is_empty() {
        if let Some(bad) = args.variant.iter().find(|v| !variants.iter().any(|s| &s.name == *v)) {
            return Err(Error::InvalidArgument(format!("unknown sweep variant {bad:?}")));
        }
        variants.retain(|v| args.variant.contains(&v.name));
    }
    let opts = SweepOptions {
        steps: args.steps,
        batch_size: args.batch,
        lr: args.lr,
        n_eval: args.n_eval,
        n_seeds: args.seeds,
    };
    let task = TaskSpec::new(0, args.task, f64::INFINITY);
    let rows = training::noise_sweep(&task, &args.snr_db, &variants, &opts, args.seed)?;
    let mut csv = String::from(SweepRow::CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    emit(args.out.as_deref(), out, &csv)
}
