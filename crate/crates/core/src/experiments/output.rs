//! CSV and JSON emission. Floats are written in their shortest round-trip
//! decimal form so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Flag(bool),
    /// Identifier without commas or quotes.
    Label(&'static str),
    Missing,
}

impl Cell {
    fn write(&self, out: &mut String) {
        match self {
            // `Debug` is shortest round-trip and switches to exponents at extremes.
            Cell::Num(v) => write!(out, "{v:?}").unwrap(),
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            Cell::Flag(b) => out.push(if *b { '1' } else { '0' }),
            Cell::Label(s) => out.push_str(s),
            Cell::Missing => {}
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.write(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// Column by name.
    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Result of one experiment run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: Value,
    pub table: CsvTable,
    /// Whether every check of the run passed; only `validate` and the
    /// pushforward identity can fail.
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub config: PathBuf,
    pub samples: PathBuf,
    pub summary: PathBuf,
}

/// Writes `<experiment>_seed<seed>_{config.json,samples.csv,summary.json}`
/// into `out_dir`, creating it if needed.
pub fn emit_outputs(config: &ExperimentConfig, output: &RunOutput, out_dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(out_dir)?;
    let stem = config.file_stem();
    let paths = OutputPaths {
        config: out_dir.join(format!("{stem}_config.json")),
        samples: out_dir.join(format!("{stem}_samples.csv")),
        summary: out_dir.join(format!("{stem}_summary.json")),
    };
    fs::write(&paths.config, serde_json::to_string_pretty(config)? + "\n")?;
    fs::write(&paths.samples, output.table.to_csv_string())?;
    let summary = json!({
        "experiment": config.experiment.name(),
        "seed": config.seed,
        "passed": output.passed,
        "config": config,
        "results": output.summary,
    });
    fs::write(&paths.summary, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip_cells() {
        let mut t = CsvTable::new(&["a", "b", "c", "d"]);
        t.push(vec![Cell::Num(0.1), Cell::Int(-3), Cell::Flag(true), Cell::Missing]);
        t.push(vec![
            Cell::Num(1.0 / 3.0),
            Cell::Int(7),
            Cell::Flag(false),
            Cell::Num(1e-300),
        ]);
        t.push(vec![
            Cell::Num(2.0),
            Cell::Label("x"),
            Cell::Num(-1.5e20),
            Cell::Num(f64::NAN),
        ]);
        assert_eq!(
            t.to_csv_string(),
            "a,b,c,d\n0.1,-3,1,\n0.3333333333333333,7,0,1e-300\n2.0,x,-1.5e20,NaN\n"
        );
        let parsed: f64 = "0.3333333333333333".parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
        assert_eq!(t.column("b").unwrap()[2], Cell::Label("x"));
        assert!(t.column("z").is_none());
    }

    #[test]
    fn creates_missing_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested/deeper");
        let cfg = ExperimentConfig::default();
        let run = RunOutput {
            summary: json!({"x": 1}),
            table: CsvTable::new(&["a"]),
            passed: true,
        };
        let paths = emit_outputs(&cfg, &run, &out).unwrap();
        assert!(paths.samples.ends_with("validate_seed0_samples.csv"));
        let summary: Value = serde_json::from_str(&fs::read_to_string(&paths.summary).unwrap()).unwrap();
        assert_eq!(summary["config"]["alpha"], json!(0.8));
        assert_eq!(summary["results"]["x"], json!(1));
        let echo: ExperimentConfig = serde_json::from_str(&fs::read_to_string(&paths.config).unwrap()).unwrap();
        assert_eq!(echo, cfg);
    }
}
