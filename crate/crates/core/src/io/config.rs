use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;

/// One `key=value` line per field.
pub fn format_config(cfg: &FrontendConfig) -> String {
    format!(
        "n_filters={}\nfilter_len={}\npool_len={}\npool_stride={}\ncompression={}\nfiltering={}\nsample_rate={}\nfmin={}\nfmax={}\nn_fft={}\n",
        cfg.n_filters,
        cfg.filter_len,
        cfg.pool_len,
        cfg.pool_stride,
        cfg.compression,
        cfg.filtering,
        cfg.sample_rate,
        cfg.fmin,
        cfg.fmax,
        cfg.n_fft
    )
}

/// Apply the `key=value` lines of `text` on top of `base`. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_config(text: &str, base: &FrontendConfig) -> Result<FrontendConfig> {
    let mut cfg = *base;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: &dyn std::fmt::Display| Error::InvalidConfig(format!("line {}: {key}: {e}", lineno + 1));
        match key {
            "n_filters" => cfg.n_filters = value.parse().map_err(|e| bad(&e))?,
            "filter_len" => cfg.filter_len = value.parse().map_err(|e| bad(&e))?,
            "pool_len" => cfg.pool_len = value.parse().map_err(|e| bad(&e))?,
            "pool_stride" => cfg.pool_stride = value.parse().map_err(|e| bad(&e))?,
            "compression" => cfg.compression = value.parse().map_err(|e| bad(&e))?,
            "filtering" => cfg.filtering = value.parse().map_err(|e| bad(&e))?,
            "sample_rate" => cfg.sample_rate = value.parse().map_err(|e| bad(&e))?,
            "fmin" => cfg.fmin = value.parse().map_err(|e| bad(&e))?,
            "fmax" => cfg.fmax = value.parse().map_err(|e| bad(&e))?,
            "n_fft" => cfg.n_fft = value.parse().map_err(|e| bad(&e))?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>, base: &FrontendConfig) -> Result<FrontendConfig> {
    parse_config(&std::fs::read_to_string(path)?, base)
}
