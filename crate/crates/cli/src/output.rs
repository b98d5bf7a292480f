//! Run manifests and all-or-nothing output directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::settings::Settings;

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "kgraph-manifest";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a command: its resolved settings, the tool and
/// file-format versions, and digests of the inputs it read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub kgraph_version: String,
    pub format_version: u32,
    pub command: String,
    pub settings: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, settings: &Settings, input_keys: &[&str]) -> Result<Self, CliError> {
        let mut inputs = BTreeMap::new();
        for &key in input_keys {
            if let Some(path) = settings.0.get(key) {
                inputs.insert(key.to_string(), InputDigest { path: path.clone(), sha256: digest(Path::new(path))? });
            }
        }
        Ok(Self {
            format: FORMAT.to_string(),
            version: VERSION,
            kgraph_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: kgraph_core::FORMAT_VERSION,
            command: command.to_string(),
            settings: settings.0.clone(),
            inputs,
            outputs: Vec::new(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Data(format!("manifest `{}`: {e}", path.display())))?;
        let m: Manifest = serde_json::from_slice(&bytes)?;
        if m.format != FORMAT || m.version != VERSION {
            return Err(CliError::Data(format!("`{}` is not a version {VERSION} run manifest", path.display())));
        }
        if m.kgraph_version != env!("CARGO_PKG_VERSION") || m.format_version != kgraph_core::FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "manifest was written by kgraph {} (format {}); this is {} (format {})",
                m.kgraph_version,
                m.format_version,
                env!("CARGO_PKG_VERSION"),
                kgraph_core::FORMAT_VERSION
            )));
        }
        Ok(m)
    }

    /// Fail if any recorded input changed since the run.
    pub fn verify_inputs(&self) -> Result<(), CliError> {
        for (key, d) in &self.inputs {
            let now = digest(Path::new(&d.path))?;
            if now != d.sha256 {
                return Err(CliError::Data(format!("input `{key}` ({}) changed since the recorded run", d.path)));
            }
        }
        Ok(())
    }
}

/// SHA-256 of a file, or of a directory's regular files in name order.
pub fn digest(path: &Path) -> Result<String, CliError> {
    let missing = |e: std::io::Error| CliError::Data(format!("`{}`: {e}", path.display()));
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(path)
            .map_err(missing)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        for p in names {
            let name = p.file_name().expect("file").to_string_lossy().into_owned();
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            let bytes = fs::read(&p)?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    } else {
        h.update(fs::read(path).map_err(missing)?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Output directory built in a sibling temporary directory and moved into place
/// by [`Staging::commit`]. Dropping it uncommitted leaves nothing behind.
pub struct Staging {
    dir: tempfile::TempDir,
    target: PathBuf,
    force: bool,
}

impl Staging {
    pub fn new(target: &Path, force: bool) -> Result<Self, CliError> {
        if target.exists() && !force {
            return Err(CliError::Usage(format!("output `{}` exists (use --force to replace it)", target.display())));
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let dir = tempfile::Builder::new().prefix(".kgraph-staging-").tempdir_in(&parent)?;
        Ok(Self { dir, target: target.to_path_buf(), force })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Write the manifest, listing every staged file, and move the directory to its target.
    pub fn commit(self, mut manifest: Manifest) -> Result<PathBuf, CliError> {
        let mut outputs: Vec<String> = fs::read_dir(self.dir.path())?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        outputs.sort();
        manifest.outputs = outputs;
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        fs::write(self.dir.path().join(MANIFEST), json)?;
        if self.force && self.target.exists() {
            if self.target.is_dir() {
                fs::remove_dir_all(&self.target)?;
            } else {
                fs::remove_file(&self.target)?;
            }
        }
        let staged = self.dir.keep();
        fs::rename(&staged, &self.target)?;
        Ok(self.target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_staging_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("out");
        {
            let s = Staging::new(&target, false).unwrap();
            fs::write(s.file("partial.txt"), "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_lists_outputs_and_refuses_to_clobber() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("out");
        let s = Staging::new(&target, false).unwrap();
        fs::write(s.file("b.txt"), "b").unwrap();
        fs::write(s.file("a.txt"), "a").unwrap();
        let m = Manifest::new("import", &Settings::default(), &[]).unwrap();
        s.commit(m).unwrap();
        let back = Manifest::read(&target.join(MANIFEST)).unwrap();
        assert_eq!(back.outputs, ["a.txt", "b.txt"]);
        assert!(matches!(Staging::new(&target, false), Err(CliError::Usage(_))));
    }

    #[test]
    fn directory_digest_tracks_content() {
        let root = tempfile::tempdir().unwrap();
        fs::write(root.path().join("x"), "1").unwrap();
        let a = digest(root.path()).unwrap();
        fs::write(root.path().join("x"), "2").unwrap();
        assert_ne!(a, digest(root.path()).unwrap());
    }
}
