//! CSV tables and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

/// One CSV cell; floats keep 17 significant digits so they round-trip.
pub enum Cell {
    Int(i64),
    Uint(u64),
    Real(f64),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Uint(v) => write!(f, "{v}"),
            Cell::Real(v) => write!(f, "{v:.16e}"),
        }
    }
}

/// Writes `header` and `rows` to `dir/name`, preceded by a comment line that
/// points to the manifest.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<Cell>>,
) -> io::Result<PathBuf> {
    let path = dir.join(name);
    let mut w = io::BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "# manifest: {MANIFEST}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(Cell::to_string).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(path)
}

#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: C,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub output_dir: String,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(subcommand: &'static str, config: C, seed: Option<u64>, output_dir: &Path) -> Self {
        Self {
            tool: "qndsim",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
            seed,
            inputs: Vec::new(),
            output_dir: output_dir.display().to_string(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        let name = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.outputs.push(name);
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join(MANIFEST), text + "\n")
    }
}
