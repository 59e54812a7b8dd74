//! Writing artifacts: CSV files with a one-line `#` provenance header and a
//! JSON sidecar per run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::VERSION;

/// First line of every CSV artifact. No timestamps, so reruns are
/// byte-identical.
pub fn header_line(command: &str, seed: u64, config_json: &str) -> String {
    format!("# qgraph {VERSION} command={command} seed={seed} config={config_json}\n")
}

/// Collects the files written by one run so they can be removed if the
/// run fails part-way.
#[derive(Debug)]
pub struct ArtifactSet {
    dir: PathBuf,
    created_dir: bool,
    header: String,
    written: Vec<PathBuf>,
}

impl ArtifactSet {
    pub fn create(dir: &Path, header: String) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(ArtifactSet { dir: dir.to_path_buf(), created_dir, header, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `name` as the header line followed by whatever `body` emits.
    pub fn csv<F>(&mut self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let mut w = BufWriter::new(File::create(&path)?);
        w.write_all(self.header.as_bytes())?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }

    /// Deletes everything written so far.
    pub fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Reads a CSV artifact, skipping the `#` header.
pub fn read_csv_body(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect())
}
