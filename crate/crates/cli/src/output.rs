//! Report staging and atomic emission. Commands build every output in
//! memory; [`Outputs::commit`] writes each through a temp file and rename,
//! then the manifest. On any failure the files already written by this run
//! are removed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to a command's reports.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: &'a RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    inputs: Vec<PathBuf>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a file the command read, for the manifest.
    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    pub fn bytes(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(format!("serializing {name}: {e}")))?;
        bytes.push(b'\n');
        self.bytes(name, bytes);
        Ok(())
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let err = |e: csv::Error| CliError::Runtime(format!("writing {name}: {e}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(format!("writing {name}: {e}")))?;
        self.bytes(name, bytes);
        Ok(())
    }

    /// Write with a library writer that targets `io::Write`.
    pub fn with_writer(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> invscore::Result<()>,
    ) -> CliResult<()> {
        let mut bytes = Vec::new();
        write(&mut bytes).map_err(|e| CliError::Runtime(format!("writing {name}: {e}")))?;
        self.bytes(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Write all staged files and `<command>.manifest.json` under the
    /// output directory. Returns the written paths.
    pub fn commit(self, cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: file_sha256(p)?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let outputs = self
            .files
            .iter()
            .map(|(name, bytes)| FileDigest {
                path: name.clone(),
                sha256: sha256_hex(bytes),
            })
            .collect();
        let manifest = Manifest {
            command: &cfg.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            config: cfg,
            inputs,
            outputs,
        };
        let mut manifest_bytes =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Runtime(format!("serializing manifest: {e}")))?;
        manifest_bytes.push(b'\n');

        fs::create_dir_all(&cfg.out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", cfg.out.display())))?;
        let mut written = Vec::new();
        let manifest_name = format!("{}.manifest.json", cfg.command);
        let all = self
            .files
            .iter()
            .map(|(n, b)| (n.as_str(), b.as_slice()))
            .chain(std::iter::once((manifest_name.as_str(), manifest_bytes.as_slice())));
        for (name, bytes) in all {
            let path = cfg.out.join(name);
            if let Err(e) = write_atomic(&path, bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(written)
    }
}

/// Write to a sibling temp file, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Runtime(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let result = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::Runtime(format!("cannot write {}: {e}", path.display())));
    }
    Ok(())
}
