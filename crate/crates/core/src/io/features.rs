use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frontend::FeatureMap;

pub const FEATURE_MAGIC: &[u8; 4] = b"LEAF";
pub const FEATURE_VERSION: u32 = 1;
pub(crate) const HEADER_LEN: usize = 20;

/// `"LEAF"`, then u32 LE version, frames, channels and frame rate, then
/// `frames × channels` f32 LE values, time-major.
pub fn encode_features(fm: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * fm.values().len());
    out.extend_from_slice(FEATURE_MAGIC);
    for v in [
        FEATURE_VERSION,
        fm.n_frames() as u32,
        fm.n_channels() as u32,
        fm.frame_rate().round() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in fm.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMap> {
    decode(bytes).map_err(|reason| Error::BadFile {
        path: PathBuf::from("<memory>"),
        reason,
    })
}

pub fn write_features(path: impl AsRef<Path>, fm: &FeatureMap) -> Result<()> {
    std::fs::write(path, encode_features(fm))?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    decode(&std::fs::read(path)?).map_err(|reason| Error::BadFile {
        path: path.to_path_buf(),
        reason,
    })
}

/// Parse a header with the given version; returns `(frames, channels,
/// frame_rate, payload)`.
pub(crate) fn split_header(bytes: &[u8], version: u32) -> std::result::Result<(usize, usize, u32, &[u8]), String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err("missing LEAF magic".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    if word(0) != version {
        return Err(format!("version {} (expected {version})", word(0)));
    }
    Ok((word(1) as usize, word(2) as usize, word(3), &bytes[HEADER_LEN..]))
}

fn decode(bytes: &[u8]) -> std::result::Result<FeatureMap, String> {
    let (m, n, rate, payload) = split_header(bytes, FEATURE_VERSION)?;
    let expected = m.checked_mul(n).and_then(|c| c.checked_mul(4)).ok_or("size overflow")?;
    if payload.len() != expected {
        return Err(format!("payload is {} bytes, header implies {expected}", payload.len()));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    FeatureMap::new(m, n, values, rate as f64).map_err(|e| e.to_string())
}
