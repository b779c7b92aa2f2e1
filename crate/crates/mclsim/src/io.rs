//! Atomic file output, checksums and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One manifest per output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub code_version: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub exit_status: i32,
    /// `ok` or the error message.
    pub status: String,
    /// Name of the error variant, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_sha256: Option<String>,
    /// Scalars worth keeping next to the outputs (horizons, iteration counts).
    #[serde(default)]
    pub facts: BTreeMap<String, String>,
    /// Output file name → sha256.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    /// Snapshot of the effective configuration.
    #[serde(default)]
    pub config: String,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("manifest: {e}")))
    }
}

/// Writes outputs into one directory and records their checksums.
pub struct OutputDir<'a> {
    pub root: &'a Path,
    pub manifest: RunManifest,
}

impl<'a> OutputDir<'a> {
    pub fn new(root: &'a Path, manifest: RunManifest) -> Self {
        Self { root, manifest }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.manifest.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn fact(&mut self, key: &str, value: impl ToString) {
        self.manifest.facts.insert(key.to_string(), value.to_string());
    }

    pub fn finish(self) -> Result<RunManifest> {
        write_atomic(&self.root.join(MANIFEST_NAME), self.manifest.to_toml().as_bytes())?;
        Ok(self.manifest)
    }
}

pub const MANIFEST_NAME: &str = "manifest.toml";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn atomic_write_and_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::new(dir.path(), RunManifest { subcommand: "validate".into(), ..Default::default() });
        out.write("a.txt", b"hello").unwrap();
        out.fact("horizon", 0.01);
        let m = out.finish().unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.txt")).unwrap(), b"hello");
        let text = std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(RunManifest::from_toml(&text).unwrap(), m);
        assert_eq!(m.outputs["a.txt"], sha256_hex(b"hello"));
    }
}
