//! Learnable audio frontend.
//!
//! A complex Gabor filterbank (squared modulus), depthwise Gaussian lowpass
//! pooling and per-channel energy normalization with learned smoothing,
//! together with a mel-filterbank baseline, exact gradients of a
//! classification loss with respect to every frontend parameter, and the
//! training and evaluation tooling around them.

pub mod autodiff;
pub mod error;
pub mod fft;
pub mod frontend;
pub mod gabor;
pub mod io;
pub mod model;
pub mod params;
pub mod rng;
pub mod signal;
pub mod training;

pub use error::{Error, Result};
pub use frontend::{
    frontend_forward, mel_equivalence, param_count, Compression, FeatureMap, Filtering, FrontendConfig, FrontendParams,
};
pub use gabor::{GaborBank, MelInitConfig};
pub use model::{Head, MultiHead};
pub use params::{Gradients, ParamSet};
pub use signal::Waveform;
