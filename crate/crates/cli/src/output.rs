//! Run directory with CSV/JSON outputs and the provenance manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Full-precision scientific notation for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub resolved: serde_json::Value,
    pub outputs: &'a [String],
}

#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Self {
            path,
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let file = self.path.join(name);
        let io = |e: csv::Error| CliError::io(&file, e.into());
        let mut w = csv::Writer::from_path(&file).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&file, e))?;
        self.outputs.push(name.to_string());
        Ok(file)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let file = self.path.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        fs::write(&file, text).map_err(|e| CliError::io(&file, e))?;
        self.outputs.push(name.to_string());
        Ok(file)
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(
        self,
        command: &str,
        config: &RunConfig,
        resolved: serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: "stochcool",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed(),
            config,
            resolved,
            outputs: &self.outputs,
        };
        let file = self.path.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&file, text).map_err(|e| CliError::io(&file, e))?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
            assert!(num(x).contains('e'));
        }
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path().join("run")).unwrap();
        run.write_csv("a.csv", &["x"], &[vec![num(1.5)]]).unwrap();
        let cfg = RunConfig {
            seed: Some(3),
            ..Default::default()
        };
        let m = run.finish("energy", &cfg, serde_json::json!({})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["seed"], 3);
        assert_eq!(v["outputs"][0], "a.csv");
        assert_eq!(
            fs::read_to_string(dir.path().join("run/a.csv")).unwrap(),
            "x\n1.5e0\n"
        );
    }
}
