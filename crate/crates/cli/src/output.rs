//! Run directories, CSV files and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::CliError;

/// Canonical text for floats in CSV files: shortest round-trip form, with
/// an exponent outside `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct RunDir {
    pub path: PathBuf,
    manifest: Vec<(String, String)>,
    runs: Vec<RunRecord>,
}

struct RunRecord {
    label: String,
    status: String,
    wall: Duration,
    detail: String,
}

impl RunDir {
    /// Creates `<out>/<subcommand>/<run_id>/`.
    pub fn create(out: &Path, subcommand: &str, run_id: &str) -> Result<Self, CliError> {
        let path = out.join(subcommand).join(run_id);
        fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Self {
            path,
            manifest: Vec::new(),
            runs: Vec::new(),
        })
    }

    pub fn write_csv<I, R>(&self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let p = self.path.join(name);
        let mut w = csv::Writer::from_path(&p).map_err(|e| CliError::Csv(p.display().to_string(), e))?;
        w.write_record(header).map_err(|e| CliError::Csv(p.display().to_string(), e))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Csv(p.display().to_string(), e))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path.join(name);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.to_string(), value.to_string()));
    }

    pub fn record_run(&mut self, label: impl Into<String>, ok: bool, wall: Duration, detail: impl Into<String>) {
        self.runs.push(RunRecord {
            label: label.into(),
            status: if ok { "ok" } else { "failed" }.into(),
            wall,
            detail: detail.into(),
        });
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.status != "ok").count()
    }

    pub fn write_manifest(&self) -> Result<(), CliError> {
        let mut s = String::new();
        for (k, v) in &self.manifest {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("runs = {}\n", self.runs.len()));
        s.push_str(&format!("failed_runs = {}\n", self.failures()));
        for (i, r) in self.runs.iter().enumerate() {
            s.push_str(&format!(
                "run.{i} = {} status={} wall_time_s={:.6}{}\n",
                r.label,
                r.status,
                r.wall.as_secs_f64(),
                if r.detail.is_empty() {
                    String::new()
                } else {
                    format!(" detail=\"{}\"", r.detail.replace('"', "'"))
                }
            ));
        }
        self.write_text("manifest.txt", &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-300, 123456789.0, 0.1 + 0.2, 3e-5] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(num(1e-300), "1e-300");
        assert_eq!(num(0.25), "0.25");
    }
}
