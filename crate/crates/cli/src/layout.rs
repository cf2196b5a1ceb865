//! File layout under the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn returns(&self, symbol: &str) -> PathBuf {
        self.root.join("returns").join(format!("{symbol}.csv"))
    }

    pub fn prices(&self, symbol: &str) -> PathBuf {
        self.root.join("prices").join(format!("{symbol}.csv"))
    }

    pub fn ingest_manifest(&self) -> PathBuf {
        self.root.join("returns").join("manifest.json")
    }

    pub fn kernel(&self, symbol: &str) -> PathBuf {
        self.root.join("models").join(format!("{symbol}.wkrn"))
    }

    /// Candidate kernel for one point of a lambda grid.
    pub fn kernel_candidate(&self, symbol: &str, lambda: f64) -> PathBuf {
        self.root.join("models").join(symbol).join(format!("lambda-{lambda}.wkrn"))
    }

    pub fn lambda_selection(&self, symbol: &str) -> PathBuf {
        self.root.join("models").join(symbol).join("lambda_selection.csv")
    }

    pub fn follower(&self, symbol: &str) -> PathBuf {
        self.root.join("models").join(format!("{symbol}.wfol"))
    }

    pub fn estimate_report(&self) -> PathBuf {
        self.root.join("models").join("estimate_report.json")
    }

    pub fn synthetic(&self, rep: usize, symbol: &str) -> PathBuf {
        self.root.join("synthetic").join(format!("rep-{rep:03}")).join(format!("{symbol}.csv"))
    }

    pub fn simulate_manifest(&self) -> PathBuf {
        self.root.join("synthetic").join("manifest.json")
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }
}

/// Creates the parent directory and writes the file through one buffered
/// writer.
pub fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::core(path.display().to_string(), e.into()))?;
        writeln!(w).map_err(|e| CliError::io(path, e))
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::core(path.display().to_string(), e.into()))
}
