use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Files written by one command. Unless [`Outputs::keep`] is called, every
/// file is removed again when the set is dropped, so a failing command
/// leaves no partial results behind.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| nloct_core::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })
            .context("cannot create output directory")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            keep: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Creates `name` in the output directory and fills it with `body`.
    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<PathBuf> {
        let path = self.path(name);
        let io_error = |e| nloct_core::Error::Io {
            path: path.clone(),
            source: e,
        };
        let file = File::create(&path).map_err(io_error)?;
        self.written.push(path.clone());
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(io_error)?;
        Ok(path)
    }

    pub fn keep(mut self) -> Vec<PathBuf> {
        self.keep = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for path in &self.written {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

/// Provenance lines written at the top of every text output.
pub fn provenance(config_hash: &str) -> Vec<String> {
    vec![
        format!("tool_version = {}", nloct_core::VERSION),
        format!("config_hash = {config_hash}"),
    ]
}
