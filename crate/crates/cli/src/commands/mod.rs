pub mod evaluate;
pub mod experiment;
pub mod fit;
pub mod mesh;
pub mod prepare;
pub mod synth;
pub mod train_cmd;

use crate::config::FileConfig;
use serde_json::json;
use std::path::Path;
use std::process::ExitCode;

pub struct Ctx {
    pub seed: u64,
    pub threads: Option<usize>,
    pub verbose: bool,
    pub file_config: FileConfig,
}

pub type CmdResult = Result<ExitCode, String>;

/// Writes the resolved-config manifest every command drops into its output
/// directory.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    ctx: &Ctx,
    resolved: &serde_json::Value,
) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let text = serde_json::to_string(resolved).expect("config serializes");
    let manifest = json!({
        "command": command,
        "seed": ctx.seed,
        "threads": ctx.threads,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": format!("{:016x}", nsdf_core::rng::fnv1a(text.as_bytes())),
        "config": resolved,
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).unwrap(),
    )
    .map_err(|e| format!("cannot write manifest: {e}"))
}
