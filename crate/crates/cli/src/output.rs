//! Output files, number formatting and exit-code mapping.

use std::fs;
use std::path::{Path, PathBuf};

use reachplan::config::OutputFormat;
use reachplan::{Error, ExperimentConfig};

/// Why a command did not succeed cleanly.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or files: exit 1.
    Usage(String),
    /// The numerics did not converge or a fit was refused: exit 2.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigParse { .. }
            | Error::ConfigValidation { .. }
            | Error::Io(_)
            | Error::InvalidInput(_)
            | Error::InvalidGoal(_)
            | Error::DimensionMismatch(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(format!("CSV: {e}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("I/O: {e}"))
    }
}

/// Outcome of a command whose files were written.
#[derive(Debug)]
pub struct Status {
    pub converged: bool,
    pub note: String,
}

impl Status {
    pub fn ok(note: impl Into<String>) -> Self {
        Status { converged: true, note: note.into() }
    }

    pub fn flagged(converged: bool, note: impl Into<String>) -> Self {
        Status { converged, note: note.into() }
    }
}

/// Float with ten significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn axis_names(dim: usize) -> Vec<&'static str> {
    ["x", "y", "z"].into_iter().chain(std::iter::repeat("w")).take(dim).collect()
}

/// `prefix_x, prefix_y, …`
pub fn axis_columns(prefix: &str, dim: usize) -> Vec<String> {
    axis_names(dim).iter().map(|a| format!("{prefix}_{a}")).collect()
}

/// `prefix1, prefix2, …`
pub fn indexed_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub struct Outputs {
    dir: PathBuf,
    csv: bool,
    svg: bool,
}

impl Outputs {
    pub fn new(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Self, Failure> {
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(cfg.output_dir()));
        fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs { dir, csv: cfg.wants(OutputFormat::Csv), svg: cfg.wants(OutputFormat::Svg) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), Failure> {
        if !self.csv {
            return Ok(());
        }
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn svg(&self, name: &str, content: &str) -> Result<(), Failure> {
        if self.svg {
            fs::write(self.path(name), content)?;
        }
        Ok(())
    }

    /// Plain-text summaries are always written.
    pub fn text(&self, name: &str, content: &str) -> Result<(), Failure> {
        fs::write(self.path(name), content)?;
        Ok(())
    }
}

/// `key = value` lines.
#[derive(Default)]
pub struct Summary(String);

impl Summary {
    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.raw(key, &num(v))
    }

    pub fn vec(&mut self, key: &str, v: &[f64]) -> &mut Self {
        let items: Vec<String> = v.iter().map(|x| num(*x)).collect();
        self.raw(key, &format!("[{}]", items.join(", ")))
    }

    pub fn text(&mut self, key: &str, v: &str) -> &mut Self {
        self.raw(key, &format!("\"{v}\""))
    }

    pub fn raw(&mut self, key: &str, v: &str) -> &mut Self {
        self.0.push_str(&format!("{key} = {v}\n"));
        self
    }

    pub fn finish(&self) -> String {
        self.0.clone()
    }
}
