//! Artifact naming and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use catbranch_core::sde::export::fmt17;

/// `{dir}/{experiment}-{fixture}-{seed}.{ext}`.
pub fn artifact_path(dir: &Path, experiment: &str, fixture: &str, seed: u64, ext: &str) -> PathBuf {
    dir.join(format!("{experiment}-{fixture}-{seed}.{ext}"))
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// CSV text builder with a mandatory header and LF endings.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    width: usize,
}

pub enum Cell<'a> {
    Num(f64),
    Int(usize),
    Text(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.width);
        let parts: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::Num(v) => fmt17(*v),
                Cell::Int(v) => v.to_string(),
                Cell::Text(s) => s.to_string(),
            })
            .collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn nums(&mut self, values: &[f64]) {
        let cells: Vec<Cell> = values.iter().map(|&v| Cell::Num(v)).collect();
        self.row(&cells);
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
