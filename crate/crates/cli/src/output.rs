//! Artifact persistence: report JSON, solution CSV (17 significant digits)
//! and the run manifest carrying the config hash, library version and
//! timestamp. Reports themselves contain no timestamps, so identical runs
//! produce byte-identical report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};
use varexp_core::grid::{CellField, GridFunction};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(dir: &str) -> anyhow::Result<OutDir> {
        let root = PathBuf::from(dir);
        std::fs::create_dir_all(&root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutDir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_solution_csv(&self, name: &str, u: &GridFunction) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, u.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_cell_csv(
        &self,
        name: &str,
        header: &str,
        field: &CellField,
    ) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        let grid = field.grid();
        let mut text = format!("{header}\n");
        for (i, v) in field.values().iter().enumerate() {
            let _ = writeln!(text, "{:.16e},{:.16e}", grid.center(i), v);
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_manifest(&self, command: &str, configs: &[&Path]) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct ConfigEntry {
            path: String,
            sha256: String,
        }
        #[derive(Serialize)]
        struct Manifest {
            command: String,
            configs: Vec<ConfigEntry>,
            library_version: &'static str,
            created_unix: u64,
        }
        let mut entries = Vec::new();
        for path in configs {
            let bytes = std::fs::read(path)
                .with_context(|| format!("hashing config {}", path.display()))?;
            let digest = Sha256::digest(&bytes);
            let mut sha256 = String::with_capacity(64);
            for byte in digest {
                let _ = write!(sha256, "{byte:02x}");
            }
            entries.push(ConfigEntry {
                path: path.display().to_string(),
                sha256,
            });
        }
        let manifest = Manifest {
            command: command.into(),
            configs: entries,
            library_version: env!("CARGO_PKG_VERSION"),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}
