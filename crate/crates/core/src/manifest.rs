//! Run manifests: the seed, configuration and input digests behind one
//! output, as sorted `key=value` lines. No timestamps, so identical runs
//! produce identical manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunManifest {
    pub stage: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    /// Input name → sha256 hex digest.
    pub inputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_reader<R: Read>(mut r: R) -> Result<String> {
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Digest of a file, or of a directory as the sorted list of its files'
/// relative names and digests.
pub fn digest_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut entries = Vec::new();
        collect_files(path, path, &mut entries)?;
        entries.sort();
        let listing: String = entries.iter().map(|(n, d)| format!("{n}\t{d}\n")).collect();
        Ok(sha256_hex(listing.as_bytes()))
    } else {
        digest_reader(std::fs::File::open(path)?)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if !is_manifest(&p) {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            out.push((rel, digest_reader(std::fs::File::open(&p)?)?));
        }
    }
    Ok(())
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const MANIFEST_SUFFIX: &str = ".manifest";

fn is_manifest(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n == MANIFEST_FILE || n.ends_with(MANIFEST_SUFFIX))
}

/// Where the manifest for `output` lives: inside it for directories,
/// beside it otherwise.
pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    if output.is_dir() {
        output.join(MANIFEST_FILE)
    } else {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(MANIFEST_SUFFIX);
        output.with_file_name(name)
    }
}

impl RunManifest {
    pub fn new(stage: &str) -> Self {
        RunManifest {
            stage: stage.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.config.insert(key.into(), value.to_string());
        self
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<&mut Self> {
        self.inputs.insert(name.to_string(), digest_path(path)?);
        Ok(self)
    }

    pub fn config_hash(&self) -> String {
        let text: String = self.config.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        sha256_hex(text.as_bytes())
    }

    /// Same stage, seed, configuration and inputs; the version may differ.
    pub fn same_run(&self, other: &RunManifest) -> bool {
        self.stage == other.stage && self.seed == other.seed && self.config == other.config && self.inputs == other.inputs
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest::default();
        let mut hash = None;
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("manifest line {}: expected key=value", no + 1)))?;
            match k {
                "stage" => m.stage = v.to_string(),
                "version" => m.version = v.to_string(),
                "seed" => {
                    m.seed = Some(v.parse().map_err(|_| Error::Format(format!("manifest line {}: bad seed", no + 1)))?)
                }
                "config_hash" => hash = Some(v.to_string()),
                _ => {
                    if let Some(k) = k.strip_prefix("config.") {
                        m.config.insert(k.to_string(), v.to_string());
                    } else if let Some(k) = k.strip_prefix("input.") {
                        m.inputs.insert(k.to_string(), v.to_string());
                    } else {
                        return Err(Error::Format(format!("manifest line {}: unknown key `{k}`", no + 1)));
                    }
                }
            }
        }
        if hash.is_some_and(|h| h != m.config_hash()) {
            return Err(Error::Format("manifest config_hash does not match its config entries".into()));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

impl fmt::Display for RunManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stage={}", self.stage)?;
        writeln!(f, "version={}", self.version)?;
        if let Some(s) = self.seed {
            writeln!(f, "seed={s}")?;
        }
        writeln!(f, "config_hash={}", self.config_hash())?;
        for (k, v) in &self.config {
            writeln!(f, "config.{k}={v}")?;
        }
        for (k, v) in &self.inputs {
            writeln!(f, "input.{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash_check() {
        let mut m = RunManifest::new("discover").with_seed(3);
        m.set("relv_min", 1000).set("k", 5);
        m.inputs.insert("teg".into(), sha256_hex(b"x"));
        let text = m.to_string();
        assert!(text.starts_with("stage=discover\n"));
        let back = RunManifest::parse(&text).unwrap();
        assert_eq!(back, m);
        let tampered = text.replace("config.k=5", "config.k=6");
        assert!(RunManifest::parse(&tampered).is_err());
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn directory_digest_ignores_manifests_and_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.tsv"), "1").unwrap();
        std::fs::write(dir.path().join("b.tsv"), "2").unwrap();
        let d1 = digest_path(dir.path()).unwrap();
        std::fs::write(dir.path().join(MANIFEST_FILE), "stage=x").unwrap();
        assert_eq!(digest_path(dir.path()).unwrap(), d1);
        std::fs::write(dir.path().join("b.tsv"), "3").unwrap();
        assert_ne!(digest_path(dir.path()).unwrap(), d1);
    }
}
