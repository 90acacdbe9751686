//! Output directory handling: atomic file writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files of one run and writes them, each through a temporary
/// file in the target directory that is renamed into place.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.dir.join(name);
        let persist = || -> std::io::Result<()> {
            let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&target).map_err(|e| e.error)?;
            Ok(())
        };
        persist().map_err(|e| CliError::io(&target, e))?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(target)
    }

    /// Writes CSV produced by `fill`.
    pub fn write_csv<F>(&mut self, name: &str, fill: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| CliError::io(&self.dir.join(name), e))?;
        self.write(name, &buf)
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(mut self, manifest: Manifest) -> Result<PathBuf, CliError> {
        let outputs: serde_json::Map<String, Value> =
            self.written.iter().map(|(n, h)| (n.clone(), Value::String(h.clone()))).collect();
        let doc = json!({
            "tool": concat!("optrack ", env!("CARGO_PKG_VERSION")),
            "command": manifest.command,
            "argv": manifest.argv,
            "program": manifest.program,
            "config": manifest.config,
            "seed": manifest.seed,
            "tolerances": manifest.tolerances,
            "results": manifest.results,
            "outputs": outputs,
        });
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n";
        self.write("manifest.json", text.as_bytes())
    }
}

/// What a run records next to its outputs to be repeatable.
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Source and SHA-256 of the program.
    pub program: Value,
    pub config: Value,
    pub seed: u64,
    pub tolerances: Value,
    pub results: Value,
}
