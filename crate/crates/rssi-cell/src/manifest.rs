//! Run manifests: everything needed to replay a command and check its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{models, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL: &str = "rssi-cell";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Effective configuration after flag overrides.
    pub config: serde_json::Value,
    pub seed: u64,
    /// Dataset directory as given on the command line, if any.
    pub data_dir: Option<String>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seed,
            data_dir: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest { path: path.to_string_lossy().into_owned(), sha256: file_sha256(path)? });
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = models::read_json(path)?;
        if m.tool != TOOL {
            return Err(Error::config(path, format!("not a {TOOL} manifest (tool = {:?})", m.tool)));
        }
        Ok(m)
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Result<Vec<String>> {
        let mut changed = Vec::new();
        for input in &self.inputs {
            if file_sha256(Path::new(&input.path))? != input.sha256 {
                changed.push(input.path.clone());
            }
        }
        Ok(changed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Collects an output directory's files while a command writes them.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `rel` (forward slashes) under the root.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(FileDigest { path: rel.into(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    /// Records the outputs and writes the manifest next to them.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = self.written;
        let path = self.root.join(MANIFEST_FILE);
        models::write_json(&path, &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_records_outputs_and_detects_changes() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        fs::write(&input, "x").unwrap();
        let mut m = RunManifest::new("evaluate", serde_json::json!({"k": 5}), 7);
        m.add_input(&input).unwrap();
        let mut out = OutputDir::create(&dir.path().join("out")).unwrap();
        out.write("a/b.csv", b"hello").unwrap();
        let m = out.finish(m).unwrap();
        assert_eq!(m.outputs[0].path, "a/b.csv");
        let back = RunManifest::load(&dir.path().join("out").join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        assert!(back.changed_inputs().unwrap().is_empty());
        fs::write(&input, "y").unwrap();
        assert_eq!(back.changed_inputs().unwrap().len(), 1);
    }
}
