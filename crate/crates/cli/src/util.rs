//! Output tracking and run manifests shared by all subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Tracks files created by a command so they can be removed if the command
/// fails partway: exit code 0 means every artifact was fully written.
#[derive(Default)]
pub struct Outputs {
    created: Vec<PathBuf>,
}

impl Outputs {
    pub fn track(&mut self, path: &Path) {
        self.created.push(path.to_path_buf());
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.track(path);
        Ok(())
    }

    pub fn discard(&self) {
        for path in &self.created {
            let _ = fs::remove_file(path);
        }
    }
}

/// Every artifact is accompanied by a manifest recording the full command
/// configuration and seed, so runs can be reproduced exactly.
#[derive(Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: T,
    pub outputs: Vec<String>,
}

pub fn write_manifest<T: Serialize>(
    outputs: &mut Outputs,
    dir_or_file: &Path,
    command: &str,
    config: T,
) -> Result<()> {
    let path = if dir_or_file.is_dir() {
        dir_or_file.join("manifest.json")
    } else {
        let mut name = dir_or_file
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "out".to_string());
        name.push_str(".manifest.json");
        dir_or_file.with_file_name(name)
    };
    let manifest = Manifest {
        tool: "satflow",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        outputs: outputs
            .created
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    outputs.write(&path, &text)
}
