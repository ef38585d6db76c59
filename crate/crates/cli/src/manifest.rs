use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every file output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Versioned schema name of the outputs, e.g. `spectrum/v1`.
    pub schema: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputDigest>,
    /// Hash over the output digests; independent of timestamps.
    pub digest: String,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Collects outputs of one run and writes them plus the manifest.
pub struct Run {
    command: String,
    schema: String,
    params: serde_json::Value,
    seed: Option<u64>,
    started: f64,
    outputs: Vec<OutputDigest>,
}

impl Run {
    pub fn start(command: &str, schema: &str, params: serde_json::Value, seed: Option<u64>) -> Self {
        Run {
            command: command.to_string(),
            schema: schema.to_string(),
            params,
            seed,
            started: now_unix(),
            outputs: Vec::new(),
        }
    }

    /// Writes `bytes` to `path`, or to stdout when `path` is `None`.
    pub fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> std::io::Result<()> {
        match path {
            Some(p) => {
                write_atomic(p, bytes)?;
                self.outputs.push(OutputDigest {
                    path: p.display().to_string(),
                    sha256: sha256_hex(bytes),
                });
            }
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    /// Writes the manifest to `path` if any file output was produced.
    pub fn finish(self, path: Option<&Path>) -> std::io::Result<()> {
        let Some(path) = path else { return Ok(()) };
        if self.outputs.is_empty() {
            return Ok(());
        }
        let joined: String = self.outputs.iter().map(|o| format!("{}\n", o.sha256)).collect();
        let m = RunManifest {
            command: self.command,
            schema: self.schema,
            digest: sha256_hex(joined.as_bytes()),
            params: self.params,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: now_unix(),
            outputs: self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&m).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

/// `out.csv` -> `out.csv.manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = std::env::temp_dir().join(format!("matgrid-manifest-{}", std::process::id()));
        let p = dir.join("a.txt");
        write_atomic(&p, b"hello").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"hello");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
