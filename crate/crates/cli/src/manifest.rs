use std::collections::BTreeMap;
use std::path::Path;

use hodgeloop::io::{atomic_write, to_json_string, FORMAT_VERSION};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command: flags, input digests and seeds.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub flags: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub seeds: BTreeMap<String, u64>,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &T) -> Self {
        // externally tagged enum: {"subcommand": {flags}}
        let tagged = serde_json::to_value(command).unwrap_or(serde_json::Value::Null);
        let (name, flags) = match tagged {
            serde_json::Value::Object(map) => map.into_iter().next().unwrap_or_default(),
            other => (String::new(), other),
        };
        Self {
            format_version: FORMAT_VERSION,
            command: name,
            flags,
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        let digest = Sha256::digest(bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputHash { path: path.display().to_string(), sha256 });
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(&self, dir: &Path) -> hodgeloop::Result<()> {
        atomic_write(&dir.join("manifest.json"), to_json_string(self)?.as_bytes())
    }
}
