//! Output files and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Table;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Tracks files written into the output directory so that a failed run can
/// remove them.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created_dir: bool,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            created_dir,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` through `fill`, recording it.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let file = File::create(&path).map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        fill(&mut w)?;
        w.flush().map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        Ok(())
    }

    /// Writes a CSV from a header and rows of numbers, formatted with the
    /// shortest round-trip representation.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        self.write(name, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(header).map_err(csv_error)?;
            for row in rows {
                csv.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_error)?;
            }
            csv.flush().map_err(|e| CliError::Io(e.to_string()))
        })
    }

    pub fn discard(self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST));
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }

    fn checksums(&self) -> Result<Vec<OutputRecord>, CliError> {
        self.written
            .iter()
            .map(|path| {
                let bytes = fs::read(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
                let digest = Sha256::digest(&bytes);
                Ok(OutputRecord {
                    file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                    bytes: bytes.len(),
                    sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
                })
            })
            .collect()
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Not a check experiment.
    Done,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub status: Status,
    pub threads: Option<usize>,
    pub duration_s: f64,
    pub config: Table,
    pub metrics: BTreeMap<String, f64>,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        outputs: &Outputs,
        experiment: &str,
        status: Status,
        threads: Option<usize>,
        duration_s: f64,
        config: Table,
        metrics: BTreeMap<String, f64>,
    ) -> Result<Self, CliError> {
        let manifest = RunManifest {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status,
            threads,
            duration_s,
            config,
            metrics,
            outputs: outputs.checksums()?,
        };
        let path = outputs.dir().join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        Ok(manifest)
    }
}
