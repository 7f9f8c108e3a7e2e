//! Output files with metadata sidecars, removed again if the command fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Seeds};
use crate::error::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// What every sidecar records about the run.
#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seeds: Seeds,
    pub config: RunConfig,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
}

impl RunInfo {
    pub fn new(command: &'static str, config: &RunConfig) -> Self {
        RunInfo {
            tool: "srcsel",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seeds: config.seeds(),
            config: config.clone(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, role: impl Into<String>, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(role.into(), sha256_file(path)?);
        Ok(())
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    output: String,
    #[serde(flatten)]
    run: &'a RunInfo,
}

/// `name.ext` → `name.ext.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Files written by one command. Unless [`Outputs::commit`] is called, dropping
/// it deletes them along with the directories it created.
pub struct Outputs {
    run: RunInfo,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(run: RunInfo) -> Self {
        Outputs {
            run,
            files: Vec::new(),
            dirs: Vec::new(),
            committed: false,
        }
    }

    pub fn create_dir(&mut self, dir: &Path) -> Result<(), CliError> {
        let missing: Vec<PathBuf> = dir
            .ancestors()
            .take_while(|p| !p.as_os_str().is_empty() && !p.exists())
            .map(Path::to_path_buf)
            .collect();
        fs::create_dir_all(dir)?;
        self.dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    fn create_parent(&mut self, path: &Path) -> Result<(), CliError> {
        match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => self.create_dir(p),
            _ => Ok(()),
        }
    }

    /// Writes the file produced by `write` and its sidecar.
    pub fn write_with(
        &mut self,
        path: &Path,
        write: impl FnOnce(&Path) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        self.create_parent(path)?;
        self.files.push(path.to_path_buf());
        write(path)?;
        let side = sidecar_path(path);
        self.files.push(side.clone());
        let meta = Sidecar {
            output: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            run: &self.run,
        };
        let mut text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        fs::write(side, text)?;
        Ok(())
    }

    pub fn write_bytes(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        self.write_with(path, |p| Ok(fs::write(p, bytes)?))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run() -> RunInfo {
        RunInfo::new("test", &RunConfig::default())
    }

    #[test]
    fn uncommitted_outputs_and_created_dirs_are_removed() {
        let root = tempfile::tempdir().unwrap();
        let file = root.path().join("a").join("b").join("out.csv");
        {
            let mut outputs = Outputs::new(run());
            outputs.write_bytes(&file, b"x\n").unwrap();
            assert!(file.exists() && sidecar_path(&file).exists());
        }
        assert!(!root.path().join("a").exists());
        assert!(root.path().exists());
    }

    #[test]
    fn committed_outputs_stay() {
        let root = tempfile::tempdir().unwrap();
        let file = root.path().join("d").join("out.csv");
        let mut outputs = Outputs::new(run());
        outputs.write_bytes(&file, b"x\n").unwrap();
        outputs.commit();
        assert_eq!(fs::read(&file).unwrap(), b"x\n");
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(sidecar_path(&file)).unwrap()).unwrap();
        assert_eq!(meta["output"], "out.csv");
        assert_eq!(meta["command"], "test");
    }
}
