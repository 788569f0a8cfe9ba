use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use leaf_core::training::TaskKind;
use leaf_core::{Compression, Error, Filtering, FrontendConfig};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "leaf", version, about = "Learnable audio frontend toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute features for a 16 kHz PCM16 WAV file.
    Extract(ExtractArgs),
    /// Train a frontend and classification heads on synthetic tasks.
    Train(TrainArgs),
    /// Held-out accuracy of a trained snapshot.
    Eval(EvalArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Dump per-channel frontend parameters as CSV.
    Inspect(InspectArgs),
    /// Paired bootstrap test on per-dataset accuracies.
    Bootstrap(BootstrapArgs),
    /// Accuracy of each frontend variant across noise levels.
    NoiseSweep(NoiseSweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FrontendKind {
    Leaf,
    LeafLog,
    LeafPcen,
    Mel,
    MelPcen,
    Convnorm,
}

impl FrontendKind {
    fn variant(self) -> (Filtering, Compression) {
        match self {
            FrontendKind::Leaf => (Filtering::Gabor, Compression::Spcen),
            FrontendKind::LeafLog => (Filtering::Gabor, Compression::Log),
            FrontendKind::LeafPcen => (Filtering::Gabor, Compression::Pcen),
            FrontendKind::Mel => (Filtering::Mel, Compression::Log),
            FrontendKind::MelPcen => (Filtering::Mel, Compression::Spcen),
            FrontendKind::Convnorm => (Filtering::NormalizedConv, Compression::Spcen),
        }
    }
}

/// Frontend selection shared by every subcommand. A config file is applied
/// over the defaults and explicit flags over the file.
#[derive(Debug, Clone, Args)]
struct FrontendArgs {
    #[arg(long, value_enum)]
    frontend: Option<FrontendKind>,
    /// Number of filters.
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    filter_len: Option<usize>,
    /// Hop between output frames, in samples.
    #[arg(long)]
    stride: Option<usize>,
    /// `key=value` frontend configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl FrontendArgs {
    fn resolve(&self) -> Result<FrontendConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => leaf_core::io::load_config(path, &FrontendConfig::default())?,
            None => FrontendConfig::default(),
        };
        if let Some(kind) = self.frontend {
            let (f, c) = kind.variant();
            cfg = cfg.with_variant(f, c);
        }
        if let Some(n) = self.filters {
            cfg.n_filters = n;
        }
        if let Some(w) = self.filter_len {
            cfg.filter_len = w;
        }
        if let Some(s) = self.stride {
            cfg.pool_stride = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    frontend: FrontendArgs,
    /// Use trained parameters (and their configuration) instead of the
    /// mel initialization.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Print per-channel correlations between the initialized Gabor
    /// frontend and the mel filterbank on this input.
    #[arg(long)]
    compare: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Comma-separated task list; one head per task.
    #[arg(long, value_delimiter = ',', default_value = "pitch")]
    task: Vec<TaskKind>,
    #[command(flatten)]
    frontend: FrontendArgs,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Signal-to-noise ratio of the training clips (`inf` for clean).
    #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
    snr_db: f64,
    #[arg(long, default_value_t = 50)]
    log_every: usize,
    /// Train only the heads.
    #[arg(long)]
    freeze_frontend: bool,
    /// Output directory for `metrics.csv` and `step_<k>` snapshots.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Tasks in head order, as given to `train`.
    #[arg(long, value_delimiter = ',', default_value = "pitch")]
    task: Vec<TaskKind>,
    #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
    snr_db: f64,
    /// Test clips per task.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[command(flatten)]
    frontend: FrontendArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per synthetic clip.
    #[arg(long, default_value_t = 1600)]
    clip_len: usize,
    #[arg(long, default_value_t = 1e-5)]
    h_rel: f64,
    /// Entries checked per parameter group; 0 checks all of them.
    #[arg(long, default_value_t = 32)]
    max_per_group: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Trained snapshot; without it the initialization is inspected.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[command(flatten)]
    frontend: FrontendArgs,
    /// Filter bank only: `channel,center_hz,sigma,fwhm`.
    #[arg(long)]
    bank: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    /// Per-dataset accuracies of the first system.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    a: Vec<f64>,
    /// Per-dataset accuracies of the second system, same order.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    b: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct NoiseSweepArgs {
    #[arg(long, default_value = "pitch")]
    task: TaskKind,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "inf,5,0,-5",
        allow_hyphen_values = true
    )]
    snr_db: Vec<f64>,
    /// Subset of `leaf-log,leaf,mel,mel-pcen`; all by default.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<String>,
    #[command(flatten)]
    frontend: FrontendArgs,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 300)]
    n_eval: usize,
    /// Training runs averaged per cell.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Extract(a) => commands::extract(&a, &mut stdout),
        Command::Train(a) => commands::train(&a, &mut stdout),
        Command::Eval(a) => commands::eval(&a, &mut stdout),
        Command::Gradcheck(a) => commands::gradcheck(&a, &mut stdout),
        Command::Inspect(a) => commands::inspect(&a, &mut stdout),
        Command::Bootstrap(a) => commands::bootstrap(&a, &mut stdout),
        Command::NoiseSweep(a) => commands::noise_sweep(&a, &mut stdout),
    };
    match result.and_then(|()| stdout.flush().map_err(Error::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
