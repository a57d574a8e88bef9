//! Output directory bookkeeping: every file goes through [`Artifacts`] so
//! the manifest can list it with its checksum.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub outcome: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub experiment: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub artifacts: Vec<ArtifactEntry>,
    pub verdict: VerdictSummary,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Artifacts {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
    started: f64,
}

impl Artifacts {
    pub fn create(root: &Path) -> std::io::Result<Artifacts> {
        fs::create_dir_all(root)?;
        Ok(Artifacts {
            root: root.to_path_buf(),
            entries: Vec::new(),
            started: unix_now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.path_of(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.entries.retain(|e| e.path != rel);
        self.entries.push(ArtifactEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        text.push(b'\n');
        self.write(rel, &text)
    }

    /// Writes the manifest through a temporary file and a rename, so a
    /// reader never sees a partial one.
    pub fn finish(mut self, config_digest: &str, experiment: &str, verdict: VerdictSummary) -> std::io::Result<RunManifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            config_digest: config_digest.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.to_string(),
            started_unix: self.started,
            finished_unix: unix_now(),
            artifacts: self.entries,
            verdict,
        };
        let tmp = self.root.join(format!(".{MANIFEST_NAME}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, &manifest).map_err(std::io::Error::other)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.root.join(MANIFEST_NAME))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_file_with_its_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path()).unwrap();
        a.write("b.txt", b"beta").unwrap();
        a.write("sub/a.txt", b"alpha").unwrap();
        a.write("b.txt", b"beta2").unwrap();
        let m = a
            .finish("d", "simulate", VerdictSummary { outcome: "ok".into(), pass: true, notes: vec![] })
            .unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(m.artifacts[0].path, "b.txt");
        for e in &m.artifacts {
            let bytes = fs::read(dir.path().join(&e.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), e.sha256);
        }
        assert!(dir.path().join(MANIFEST_NAME).exists());
        assert!(!dir.path().join(".manifest.json.tmp").exists());
    }
}
