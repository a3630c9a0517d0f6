use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use repricing::{ModelKind, RawParams};

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Invalid(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) | Failure::Invalid(m) => f.write_str(m),
        }
    }
}

/// One value of a tabular artifact.
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // `Display` for f64 prints the shortest string that round-trips.
            Cell::Num(x) => x.to_string(),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x)
                .map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::Int(i) => (*i).into(),
            Cell::Bool(b) => (*b).into(),
            Cell::Text(s) => s.clone().into(),
            Cell::Null => serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub format: &'static str,
}

#[derive(Serialize)]
pub struct Manifest {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub parameters: Option<RawParams>,
    pub model: Option<ModelKind>,
    pub seed: u64,
    pub format: &'static str,
    pub outputs: Vec<OutputFile>,
    pub started_unix_seconds: f64,
    pub duration_seconds: f64,
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Artifact directory plus the list of files written so far.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    fn write(&mut self, name: &str, format: &'static str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(OutputFile {
            path: name.to_string(),
            format,
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, "json", text.as_bytes())
    }

    /// Writes `stem.csv` or `stem.json` (an array of row objects).
    pub fn table(
        &mut self,
        stem: &str,
        format: &'static str,
        header: &[&str],
        rows: Vec<Vec<Cell>>,
    ) -> Result<(), Failure> {
        if format == "csv" {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Failure::Io(e.to_string());
            w.write_record(header).map_err(io)?;
            for row in &rows {
                w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
            self.write(&format!("{stem}.csv"), "csv", &bytes)
        } else {
            let objects: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|row| {
                    header
                        .iter()
                        .map(|h| h.to_string())
                        .zip(row.iter().map(Cell::json))
                        .collect()
                })
                .collect();
            self.json(&format!("{stem}.json"), &objects)
        }
    }

    /// Writes the manifest; always the last file.
    pub fn finish(mut self, manifest: &Manifest) -> Result<(), Failure> {
        self.json("manifest.json", manifest)
    }
}
