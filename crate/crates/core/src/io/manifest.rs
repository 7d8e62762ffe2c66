//! Reproducibility manifests: input hashes, seeds, and tool version, written
//! next to each subcommand's outputs. Deliberately timestamp-free so that
//! identical runs produce identical manifests.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<InputHash>,
}

/// SHA-256 of a file's bytes, hex-encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, input_paths: &[&Path]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(input_paths.len());
        for p in input_paths {
            inputs.push(InputHash {
                path: p.display().to_string(),
                sha256: file_sha256(p)?,
            });
        }
        inputs.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            inputs,
        })
    }

    /// Writes `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("manifest.json");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        std::fs::write(&a, "hello").unwrap();
        let h1 = file_sha256(&a).unwrap();
        let h2 = file_sha256(&a).unwrap();
        assert_eq!(h1, h2);
        // Known SHA-256 of "hello".
        assert_eq!(h1, "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
        std::fs::write(&a, "hello!").unwrap();
        assert_ne!(file_sha256(&a).unwrap(), h1);
    }

    #[test]
    fn identical_runs_produce_identical_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("in.csv");
        std::fs::write(&a, "i,j\n1,2\n").unwrap();
        let m1 = Manifest::new("fit", Some(9), &[&a]).unwrap();
        let m2 = Manifest::new("fit", Some(9), &[&a]).unwrap();
        assert_eq!(m1, m2);
        m1.write(dir.path()).unwrap();
        let text1 = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        m2.write(dir.path()).unwrap();
        let text2 = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert_eq!(text1, text2);
    }
}
