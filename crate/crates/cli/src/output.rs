use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, MANIFEST_NAME};

/// Pass/fail entry in the manifest. Entries without a threshold are
/// informational and always pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckStatus {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckStatus {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        CheckStatus {
            name: name.to_owned(),
            passed: value <= threshold,
            value: Some(value),
            threshold: Some(threshold),
            detail: None,
        }
    }

    pub fn info(name: &str, value: f64) -> Self {
        CheckStatus {
            name: name.to_owned(),
            passed: true,
            value: Some(value),
            threshold: None,
            detail: None,
        }
    }

    pub fn failed(name: &str, detail: String) -> Self {
        CheckStatus {
            name: name.to_owned(),
            passed: false,
            value: None,
            threshold: None,
            detail: Some(detail),
        }
    }
}

/// Contents of `run.json`. `wall_time` is reported on stderr only, so that
/// repeated runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub verb: String,
    pub scenario_digest: String,
    pub tool_version: String,
    #[serde(skip)]
    pub wall_time: f64,
    /// File names relative to the output directory, in write order.
    pub outputs: Vec<String>,
    pub status: Vec<CheckStatus>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.status.iter().all(|s| s.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckStatus> {
        self.status.iter().filter(|s| !s.passed)
    }
}

/// Output directory that records every file written into it.
pub(crate) struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_owned(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.dir, name, contents.as_bytes())?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_owned());
        }
        Ok(())
    }

    pub fn written(&self) -> Vec<String> {
        self.written.clone()
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.dir, MANIFEST_NAME, text.as_bytes())
    }
}

/// Writes to a temporary file in `dir` and renames it into place, so a
/// reader never sees a half-written file.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(&target)
        .map_err(|e| CliError::io(&target, e.error))?;
    Ok(())
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
