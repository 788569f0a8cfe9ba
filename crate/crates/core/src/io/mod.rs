//! Feature files, model snapshots and configuration files.

mod config;
mod features;
mod snapshot;

pub use config::{format_config, load_config, parse_config};
pub use features::{decode_features, encode_features, read_features, write_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use snapshot::{load_snapshot, save_snapshot, MANIFEST_FILE, SNAPSHOT_CONFIG_FILE};
