use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::{CliResult, Failure, InputContext};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat a run: the arguments, the config-file values
/// in effect and the digests of what went in and came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, without `--config`.
    pub argv: Vec<String>,
    /// Working directory the relative paths in `argv` resolve against.
    pub cwd: PathBuf,
    /// Config-file entries in effect.
    pub config: BTreeMap<String, String>,
    /// Fully resolved settings, for reading rather than replaying.
    pub resolved: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    /// Relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub version: String,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Output directory that remembers which files were written to it.
#[derive(Debug)]
pub struct OutDir {
    pub root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&root)
            .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root, written: Vec::new() })
    }

    /// Renders into memory and writes atomically, so a failed run leaves no
    /// half-written file behind.
    pub fn write<F>(&mut self, name: &str, render: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> episir::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf)?;
        let path = self.root.join(name);
        write_atomic(&path, &buf).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        self.written.push(PathBuf::from(name));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    pub fn digests(&self) -> CliResult<Vec<FileDigest>> {
        self.written
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.clone(),
                    sha256: sha256_file(&self.root.join(p))?,
                })
            })
            .collect()
    }
}

pub fn input_digests(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: sha256_file(p).input(&format!("cannot read {}", p.display()))?,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_vec_pretty(self).map_err(Failure::runtime)?;
        text.push(b'\n');
        write_atomic(&dir.join(MANIFEST_NAME), &text).map_err(Failure::runtime)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).input(&format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).input(&format!("manifest {}", path.display()))
    }
}
