use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// What produced an output: enough to rerun the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(args: &[String], seed: u64) -> Self {
        Self { tool: format!("mentalgen {}", env!("CARGO_PKG_VERSION")), args: args.to_vec(), seed, inputs: Vec::new() }
    }

    /// Records the digest of an input file.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(InputDigest { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    /// Writes `<path>.provenance.json` next to an output whose format has no
    /// room for it.
    pub fn write_sidecar(&self, path: &Path) -> Result<(), CliError> {
        let mut name = path.as_os_str().to_owned();
        name.push(".provenance.json");
        let side = PathBuf::from(name);
        std::fs::write(&side, serde_json::to_string_pretty(self).expect("provenance serializes"))
            .map_err(|e| CliError::io(&side, e))
    }
}
