use std::path::PathBuf;

/// Errors raised by the frontend library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("sample rate {got} Hz is not supported (expected {expected} Hz)")]
    BadRate { got: u32, expected: u32 },
    #[error("frequency {freq} Hz is at or above the Nyquist limit of {nyquist} Hz")]
    AliasedFrequency { freq: f64, nyquist: f64 },
    #[error("input has zero power, cannot scale noise to a finite SNR")]
    SilentInput,
    #[error("mel triangle {channel} collapsed onto a single FFT bin")]
    DegenerateTriangle { channel: usize },
    #[error("compression input contains a negative value")]
    NegativeInput,
    #[error("input contains NaN or infinite values")]
    NonFiniteInput,
    #[error("convolution kernel {index} has zero norm")]
    ZeroFilter { index: usize },
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("shape mismatch for `{name}`: {detail}")]
    ShapeMismatch { name: String, detail: String },
    #[error("task id {task} is out of range for a model with {num_tasks} heads")]
    UnknownTask { task: usize, num_tasks: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed file {path}: {reason}")]
    BadFile { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short variant name, printed by the CLI on failure.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotWav(_) => "NotWav",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::BadRate { .. } => "BadRate",
            Error::AliasedFrequency { .. } => "AliasedFrequency",
            Error::SilentInput => "SilentInput",
            Error::DegenerateTriangle { .. } => "DegenerateTriangle",
            Error::NegativeInput => "NegativeInput",
            Error::NonFiniteInput => "NonFiniteInput",
            Error::ZeroFilter { .. } => "ZeroFilter",
            Error::NonFiniteLoss => "NonFiniteLoss",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::UnknownTask { .. } => "UnknownTask",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::BadFile { .. } => "BadFile",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
