use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_FILE: &str = "run-manifest.json";

#[derive(Serialize)]
struct Versions {
    tinyrec: &'static str,
    rng: &'static str,
    charset_format: &'static str,
    checkpoint_format: u32,
    augment_config: u32,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    seed: u64,
    config: &'a Value,
    versions: Versions,
}

/// Records what ran, with which seed and resolved configuration, so the
/// run can be repeated from this file alone.
pub fn write_manifest(dir: &Path, command: &str, seed: u64, config: &Value) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let m = Manifest {
        command,
        argv: std::env::args().collect(),
        seed,
        config,
        versions: Versions {
            tinyrec: env!("CARGO_PKG_VERSION"),
            rng: tinyrec::rng::ALGORITHM,
            charset_format: tinyrec::charset::VERSION,
            checkpoint_format: tinyrec::network::CHECKPOINT_VERSION,
            augment_config: tinyrec::augment::CONFIG_VERSION,
        },
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&m)? + "\n";
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
