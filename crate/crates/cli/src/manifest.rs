//! Run manifests written next to every output set.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<String>,
    /// SHA-256 of the canonical JSON of `parameters`.
    pub parameter_hash: String,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    /// Body, timing and flags: everything needed to rerun.
    pub parameters: Value,
}

/// Hex SHA-256 of the compact JSON rendering (object keys are sorted).
pub fn parameter_hash(parameters: &Value) -> String {
    let text = serde_json::to_string(parameters).expect("JSON values always serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects outputs of one run and writes the manifest last.
pub struct Run {
    command: &'static str,
    config: Option<PathBuf>,
    out: PathBuf,
    started: Instant,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(command: &'static str, config: Option<&Path>, out: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", out.display())))?;
        Ok(Self {
            command,
            config: config.map(Path::to_path_buf),
            out: out.to_path_buf(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(mut self, parameters: Value) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config.as_ref().map(|p| p.display().to_string()),
            parameter_hash: parameter_hash(&parameters),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: std::mem::take(&mut self.outputs),
            parameters,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(self.out.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_is_deterministic_and_key_order_free() {
        let a = json!({"b": 1.0, "a": [1, 2]});
        let b = json!({"a": [1, 2], "b": 1.0});
        assert_eq!(parameter_hash(&a), parameter_hash(&b));
        assert_eq!(parameter_hash(&a).len(), 64);
        assert_ne!(parameter_hash(&a), parameter_hash(&json!({"b": 2.0, "a": [1, 2]})));
    }
}
