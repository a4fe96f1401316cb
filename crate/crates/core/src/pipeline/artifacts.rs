use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writer for one stage directory; tracks what it wrote.
pub struct StageDir {
    pub root: PathBuf,
    pub name: &'static str,
    outputs: Vec<FileDigest>,
    inputs: Vec<FileDigest>,
}

impl StageDir {
    pub fn create(root: &Path, name: &'static str) -> Result<Self> {
        let dir = root.join(name);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(StageDir {
            root: root.to_path_buf(),
            name,
            outputs: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(self.name).join(file)
    }

    fn rel(&self, path: &Path) -> String {
        match path.strip_prefix(&self.root) {
            Ok(p) => p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
            Err(_) => path.to_string_lossy().into_owned(),
        }
    }

    /// Records a file already written under this stage.
    pub fn record(&mut self, file: &str) -> Result<()> {
        let p = self.path(file);
        self.outputs.push(FileDigest {
            path: self.rel(&p),
            sha256: sha256_file(&p)?,
        });
        Ok(())
    }

    pub fn write_bytes(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(file);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.record(file)
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(file, text.as_bytes())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: self.rel(path),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn finish(mut self, config_hash: &str, seed: u64) -> Result<Manifest> {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            format_version: ARTIFACT_FORMAT_VERSION,
            stage: self.name.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let p = self.root.join(self.name).join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(m)
    }
}

/// Loads an upstream stage's manifest, refusing artifacts from another
/// config or files changed since they were written.
pub fn check_upstream(root: &Path, stage: &str, config_hash: &str) -> Result<Manifest> {
    let p = root.join(stage).join(MANIFEST);
    if !p.exists() {
        return Err(Error::MissingArtifact(p));
    }
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.config_hash != config_hash {
        return Err(Error::StaleArtifact {
            path: p,
            found: m.config_hash,
            expected: config_hash.to_string(),
        });
    }
    for o in &m.outputs {
        let f = root.join(&o.path);
        if !f.exists() {
            return Err(Error::MissingArtifact(f));
        }
        let digest = sha256_file(&f)?;
        if digest != o.sha256 {
            return Err(Error::StaleArtifact {
                path: f,
                found: format!("sha256 {digest}"),
                expected: format!("sha256 {}", o.sha256),
            });
        }
    }
    Ok(m)
}
