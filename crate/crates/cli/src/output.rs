use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// A CSV cell; floats are written with 17 significant digits.
#[derive(Debug, Clone)]
pub enum Cell {
    Str(String),
    Float(f64),
    Int(i64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Int(i) => i.to_string(),
        }
    }
}

/// Builds a row from heterogeneous values.
#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($crate::output::Cell::from($v)),*] };
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub stages: Vec<Stage>,
    pub files: Vec<String>,
}

/// Output directory that records every file it writes and per-stage timings.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
    stages: Vec<Stage>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    fn target(&mut self, rel: &str) -> CliResult<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(path)
    }

    pub fn write_csv<I>(&mut self, rel: &str, header: &[&str], rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = Vec<Cell>>,
    {
        let path = self.target(rel)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len(), "{rel}");
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let path = self.target(rel)?;
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| crate::error::CliError::Io(e.to_string()))?;
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn stage<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        let t0 = Instant::now();
        let r = f(self);
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        r
    }

    pub fn push_stage(&mut self, name: &str, seconds: f64) {
        self.stages.push(Stage {
            name: name.to_string(),
            seconds,
        });
    }

    /// Writes `manifest.json` through a temporary file and a rename.
    pub fn finish(self, command: &str, seed: u64, config_hash: &str) -> CliResult<Manifest> {
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            stages: self.stages,
            files: self.files,
        };
        let tmp = self.root.join(".manifest.json.tmp");
        let mut s = serde_json::to_string_pretty(&manifest)
            .map_err(|e| crate::error::CliError::Io(e.to_string()))?;
        s.push('\n');
        fs::write(&tmp, s)?;
        fs::rename(&tmp, self.root.join("manifest.json"))?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
