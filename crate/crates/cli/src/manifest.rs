//! Run manifests written next to every artifact.
//!
//! A manifest records the exact arguments, resolved configuration, seeds and
//! file paths of one invocation. `haiku replay --manifest FILE` re-runs it;
//! with the same inputs the outputs come back byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Every option after defaults were filled in.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Output path to file format.
    pub formats: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, config: &impl Serialize) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            argv,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            formats: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.to_owned(), seed);
        self
    }

    pub fn inputs<'a>(mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> Self {
        self.inputs.extend(paths.into_iter().cloned());
        self
    }

    /// Path of the manifest that belongs to `artifact`.
    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    /// Writes the manifest beside each output.
    pub fn write(mut self, outputs: &[(PathBuf, &str)]) -> CliResult<()> {
        for (path, format) in outputs {
            self.outputs.push(path.clone());
            self.formats.insert(path.display().to_string(), (*format).to_owned());
        }
        let mut text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Manifest {
            path: PathBuf::new(),
            message: e.to_string(),
        })?;
        text.push('\n');
        for (path, _) in outputs {
            let target = Self::path_for(path);
            fs::write(&target, &text).map_err(|e| CliError::Manifest {
                path: target.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let err = |message: String| CliError::Manifest {
            path: path.to_owned(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if manifest.manifest_version != MANIFEST_VERSION {
            return Err(err(format!("unsupported manifest version {}", manifest.manifest_version)));
        }
        Ok(manifest)
    }
}
