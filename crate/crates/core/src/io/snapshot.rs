//! A snapshot is a directory holding `config.txt`, one binary file per
//! parameter vector and `manifest.txt` with `name length sha256` lines.
//! Parameter files reuse the feature-file header with version 2, `M` =
//! vector length, `N` = 1, frame rate 0, and f64 LE values.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::io::config::{format_config, parse_config};
use crate::io::features::{split_header, FEATURE_MAGIC};
use crate::params::ParamSet;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SNAPSHOT_CONFIG_FILE: &str = "config.txt";
const PARAM_VERSION: u32 = 2;

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn encode_param(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * values.len());
    out.extend_from_slice(FEATURE_MAGIC);
    for v in [PARAM_VERSION, values.len() as u32, 1, 0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_snapshot(dir: impl AsRef<Path>, cfg: &FrontendConfig, params: &ParamSet) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(SNAPSHOT_CONFIG_FILE), format_config(cfg))?;
    let mut manifest = String::new();
    for (name, values) in params.iter() {
        let bytes = encode_param(values);
        std::fs::write(dir.join(format!("{name}.bin")), &bytes)?;
        manifest.push_str(&format!("{name} {} {}\n", values.len(), hex_digest(&bytes)));
    }
    std::fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

/// Read a snapshot back, verifying lengths and checksums.
pub fn load_snapshot(dir: impl AsRef<Path>) -> Result<(FrontendConfig, ParamSet)> {
    let dir = dir.as_ref();
    let cfg = parse_config(
        &std::fs::read_to_string(dir.join(SNAPSHOT_CONFIG_FILE))?,
        &FrontendConfig::default(),
    )?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let bad = |path: &Path, reason: String| Error::BadFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut params = ParamSet::new();
    for line in std::fs::read_to_string(&manifest_path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
    {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [name, len, digest] = fields[..] else {
            return Err(bad(&manifest_path, format!("malformed line {line:?}")));
        };
        let len: usize = len
            .parse()
            .map_err(|_| bad(&manifest_path, format!("bad length in {line:?}")))?;
        let path = dir.join(format!("{name}.bin"));
        let bytes = std::fs::read(&path)?;
        if hex_digest(&bytes) != digest {
            return Err(bad(&path, "checksum mismatch".into()));
        }
        let (m, n, _, payload) = split_header(&bytes, PARAM_VERSION).map_err(|r| bad(&path, r))?;
        if m != len || n != 1 || payload.len() != 8 * len {
            return Err(bad(&path, format!("expected {len} values")));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.insert(name, values);
    }
    Ok((cfg, params))
}
