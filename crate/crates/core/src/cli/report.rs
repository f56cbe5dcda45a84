use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bench::BenchReport;
use crate::flow::{self, FlowParams, MicroscopyComparison, Regime};
use crate::region::TransformReport;
use crate::sim::PorosityReport;
use crate::REPORT_SCHEMA_VERSION;

pub const TOOL_NAME: &str = "porogen";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, data: &[u8]) -> Self {
        InputDigest {
            path: path.display().to_string(),
            bytes: data.len(),
            sha256: sha256_hex(data),
        }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: String,
    pub gamma: f64,
    pub width_mm: f64,
    pub regime: Regime,
    /// Deposited cross-section: stadium for traces, circle for fibers.
    pub area_mm2: f64,
}

impl Prediction {
    pub fn new(label: impl Into<String>, params: &FlowParams) -> Self {
        let (width, regime) = flow::line_width(params);
        Prediction {
            label: label.into(),
            gamma: params.flow_fraction,
            width_mm: width,
            regime,
            area_mm2: flow::deposited_area(width, params.layer_height),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub generated_at: String,
    pub params: FlowParams,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<InputDigest>,
    pub predictions: Vec<Prediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub microscopy: Option<MicroscopyComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub porosity: Option<PorosityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchReport>,
    pub has_warnings: bool,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, generated_at: String, params: FlowParams) -> Self {
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: TOOL_NAME,
            tool_version: TOOL_VERSION,
            command: command.to_string(),
            generated_at,
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
            predictions: Vec::new(),
            microscopy: None,
            transform: None,
            porosity: None,
            bench: None,
            has_warnings: false,
            warnings: Vec::new(),
        }
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
        self.has_warnings = true;
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}

/// The caller's fixed timestamp, or the current UTC time.
pub fn timestamp(fixed: Option<&str>) -> String {
    match fixed {
        Some(t) => t.to_string(),
        None => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    }
}

/// Writes every file through a temporary sibling and renames them into
/// place only after all contents are on disk, so a failure leaves no
/// partial output behind.
pub fn write_atomic(files: &[(PathBuf, Vec<u8>)]) -> std::io::Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, data) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir)?;
        let mut tmp = tempfile::Builder::new()
            .prefix(".porogen-")
            .suffix(".tmp")
            .tempfile_in(&dir)?;
        tmp.write_all(data)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| e.error)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("sub/b.txt");
        write_atomic(&[(a.clone(), b"one".to_vec()), (b.clone(), b"two".to_vec())]).unwrap();
        assert_eq!(fs::read(&a).unwrap(), b"one");
        assert_eq!(fs::read(&b).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }

    #[test]
    fn fixed_timestamp_is_verbatim() {
        assert_eq!(timestamp(Some("2020-01-01T00:00:00Z")), "2020-01-01T00:00:00Z");
        assert!(timestamp(None).ends_with('Z'));
    }
}
