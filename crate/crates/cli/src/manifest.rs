//! Run manifest written alongside every command's outputs, recording the
//! command, resolved inputs, seed, version and wall-clock duration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

#[derive(Serialize)]
pub struct ManifestFile {
    pub command: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub started_at: String,
    pub wall_clock_ms: u128,
}

pub struct RunManifest {
    command: String,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    started_at: chrono::DateTime<chrono::Utc>,
    start: Instant,
}

fn resolved(path: &Path) -> String {
    path.canonicalize()
        .unwrap_or_else(|_| path.to_path_buf())
        .display()
        .to_string()
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[PathBuf], seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs: inputs.to_vec(),
            seed,
            started_at: chrono::Utc::now(),
            start: Instant::now(),
        }
    }

    /// Manifest path: `<first output>.manifest.json`, or
    /// `<command>.manifest.json` when the command produced no files.
    fn path(&self, outputs: &[PathBuf]) -> PathBuf {
        match outputs.first() {
            Some(out) => {
                let mut name = out.as_os_str().to_os_string();
                name.push(".manifest.json");
                PathBuf::from(name)
            }
            None => PathBuf::from(format!("{}.manifest.json", self.command)),
        }
    }

    pub fn finish(&mut self, seed: Option<u64>, outputs: &[PathBuf]) -> std::io::Result<()> {
        if seed.is_some() {
            self.seed = seed;
        }
        let file = ManifestFile {
            command: self.command.clone(),
            inputs: self.inputs.iter().map(|p| resolved(p)).collect(),
            outputs: outputs.iter().map(|p| resolved(p)).collect(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at.to_rfc3339(),
            wall_clock_ms: self.start.elapsed().as_millis(),
        };
        let text = serde_json::to_string_pretty(&file).expect("manifest serializes");
        std::fs::write(self.path(outputs), text)
    }
}
