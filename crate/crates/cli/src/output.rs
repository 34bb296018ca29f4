//! Output files with provenance, written all-or-nothing.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;

/// SHA-256 of the resolved configuration, independent of the output
/// directory and of the file's formatting.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let mut c = config.clone();
    c.outputs.directory = PathBuf::new();
    let text = serde_json::to_string(&c).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn provenance(config: &ScenarioConfig, command: &str) -> Value {
    let n = &config.numerics;
    json!({
        "tool": "nanoring",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": config_hash(config),
        "tolerances": {
            "radiation": n.tolerance,
            "nu_max": n.nu_max,
            "nodes": n.nodes,
            "panels": n.panels,
            "spectral_nodes": n.spectral_nodes,
            "adaptive": n.adaptive,
        },
    })
}

/// Files of one command, kept in memory until [`Outputs::commit`].
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    /// CSV preceded by a `# {provenance}` line.
    pub fn csv(&mut self, name: &str, provenance: &Value, body: &str) {
        self.files.push((name.into(), format!("# {provenance}\n{body}").into_bytes()));
    }

    /// JSON object with a `provenance` member.
    pub fn json(&mut self, name: &str, provenance: &Value, mut body: Value) {
        body["provenance"] = provenance.clone();
        let text = serde_json::to_string_pretty(&body).expect("json serializes");
        self.files.push((name.into(), format!("{text}\n").into_bytes()));
    }

    /// Writes every file to a temporary name, then renames them in place.
    pub fn commit(self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut staged = Vec::new();
        let result = (|| {
            for (name, bytes) in &self.files {
                let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
                staged.push(tmp.clone());
                let mut f = std::fs::File::create(&tmp)?;
                f.write_all(bytes)?;
                f.sync_all()?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            for tmp in &staged {
                let _ = std::fs::remove_file(tmp);
            }
            return Err(e);
        }
        let mut out = Vec::new();
        for ((name, _), tmp) in self.files.iter().zip(&staged) {
            let path = dir.join(name);
            std::fs::rename(tmp, &path)?;
            out.push(path);
        }
        Ok(out)
    }
}
