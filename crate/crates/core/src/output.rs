//! Machine-readable outputs: CSV tables at full double precision, JSON with
//! fields in declaration order, and run manifests.

use crate::config::Config;
use crate::confined::KernelRecord;
use crate::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Shortest fixed-width form that round-trips every `f64` (17 significant digits).
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A header row and string cells; numbers go through [`format_f64`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| format_f64(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_to<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Everything needed to reproduce one command: arguments, the resolved
/// configuration, and the kernels it used. Carries no timestamps, so
/// repeated runs produce identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub arguments: Vec<(String, String)>,
    pub config: Option<String>,
    pub config_sha256: Option<String>,
    pub kernels: Vec<KernelRecord>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Config>) -> Self {
        let text = config.map(Config::to_canonical_string);
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: text.as_deref().map(sha256),
            config: text,
            arguments: Vec::new(),
            kernels: Vec::new(),
            outputs: Vec::new(),
            warnings: config.map(Config::warnings).unwrap_or_default(),
        }
    }

    pub fn arg(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.arguments.push((name.to_string(), value.to_string()));
        self
    }

    /// Manifest path written next to `output`: `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    /// Records `output` and writes the manifest beside it.
    pub fn write_beside(&mut self, output: &Path) -> Result<PathBuf> {
        self.outputs.push(output.display().to_string());
        let path = Self::path_for(output);
        write_json(&path, self)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new(&["x", "y"]);
        t.push_numbers(&[1.0, -0.5]);
        assert_eq!(t.to_csv_string().unwrap(), "x,y\n1.0000000000000000e0,-5.0000000000000000e-1\n");
    }

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(RunManifest::path_for(Path::new("out/disp.csv")), PathBuf::from("out/disp.csv.manifest.json"));
        let a = to_json(&RunManifest::new("validate", Some(&Config::default()))).unwrap();
        let b = to_json(&RunManifest::new("validate", Some(&Config::default()))).unwrap();
        assert_eq!(a, b);
        assert!(a.find("\"command\"").unwrap() < a.find("\"config\"").unwrap());
    }
}
