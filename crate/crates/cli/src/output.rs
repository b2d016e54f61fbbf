//! CSV tables and output files. Every file starts with a comment line
//! carrying the config hash and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ergodic_core::io::fmt_f64;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn num(v: f64) -> String {
    fmt_f64(v)
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes files into one directory, each prefixed with the provenance line.
pub struct OutputDir {
    dir: PathBuf,
    stamp: String,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, config_hash: &str, seed: u64) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stamp: format!("# config_hash={config_hash} seed={seed}"),
            written: Vec::new(),
        })
    }

    pub fn write_with<F>(&mut self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{}", self.stamp)?;
        body(&mut w)?;
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<PathBuf, CliError> {
        self.write_with(name, |w| Ok(table.write(w)?))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
