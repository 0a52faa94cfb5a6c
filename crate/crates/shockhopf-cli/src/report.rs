//! Run reports and their emission as CSV, JSON and SVG files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::criteria::{determinism, CriterionResult};
use crate::results::{Plot, StageResult};
use crate::{svg, CliError, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Computed,
    Cached,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    /// Wall clock of this run; near zero for a cache hit.
    pub seconds: f64,
    /// Timings measured when the result was computed.
    pub timings: BTreeMap<String, f64>,
    pub constants: BTreeMap<String, f64>,
    pub error: Option<String>,
    pub exit_code: Option<i32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
    pub criteria: Vec<CriterionResult>,
    pub artifacts: Vec<PathBuf>,
    #[serde(skip)]
    pub results: BTreeMap<Stage, StageResult>,
}

impl RunReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn criterion(&self, id: u8) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }

    /// Exit code of the first failed stage, 0 when every stage succeeded.
    pub fn exit_code(&self) -> i32 {
        self.stages.iter().find_map(|s| s.exit_code).unwrap_or(0)
    }

    pub fn short_hash(&self) -> &str {
        &self.config_hash[..12]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Formats {
    pub const ALL: Formats = Formats { csv: true, json: true, svg: true };
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write(path: PathBuf, bytes: &[u8], out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
    out.push(path);
    Ok(())
}

fn csv_bytes(columns: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).map_err(|e| CliError::Io(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<name>-<hash>.<ext>` files into `dir` and returns their paths.
///
/// CSV digests are kept in `digests-<hash>.json`; when a previous run left
/// one, criterion 11 compares against it before it is replaced.
pub fn emit_report(report: &mut RunReport, formats: Formats, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if report.stages.is_empty() {
        return Err(CliError::EmptyReport);
    }
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let hash = report.short_hash().to_string();
    let mut files = Vec::new();
    if formats.csv {
        let mut digests = BTreeMap::new();
        for result in report.results.values() {
            for t in &result.tables {
                let bytes = csv_bytes(&t.columns, t.rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()))?;
                let name = format!("{}-{hash}.csv", t.name);
                digests.insert(name.clone(), hex(&bytes));
                write(dir.join(name), &bytes, &mut files)?;
            }
        }
        let columns = ["stage", "name", "value"].map(String::from);
        let rows = report.results.values().flat_map(|r| r.constants.iter().map(|(k, v)| vec![r.stage.to_string(), k.clone(), v.to_string()]));
        let bytes = csv_bytes(&columns, rows)?;
        let name = format!("constants-{hash}.csv");
        digests.insert(name.clone(), hex(&bytes));
        write(dir.join(name), &bytes, &mut files)?;

        let digest_path = dir.join(format!("digests-{hash}.json"));
        if let Some(previous) = std::fs::read_to_string(&digest_path).ok().and_then(|s| serde_json::from_str::<BTreeMap<String, String>>(&s).ok()) {
            let shared: Vec<&String> = digests.keys().filter(|k| previous.contains_key(*k)).collect();
            let differing: Vec<String> = shared.iter().filter(|k| previous[**k] != digests[**k]).map(|k| k.to_string()).collect();
            let c11 = determinism(shared.len(), &differing);
            match report.criteria.iter_mut().find(|c| c.id == 11) {
                Some(c) => *c = c11,
                None => report.criteria.push(c11),
            }
        }
        let text = serde_json::to_string_pretty(&digests).map_err(|e| CliError::Io(e.to_string()))?;
        write(digest_path, text.as_bytes(), &mut files)?;
    }
    if formats.svg {
        for result in report.results.values() {
            for p in &result.plots {
                let text = match p {
                    Plot::Lines(l) => svg::line_plot(l),
                    Plot::Heatmap(h) => svg::heatmap(h),
                };
                write(dir.join(format!("{}-{hash}.svg", p.name())), text.as_bytes(), &mut files)?;
            }
        }
    }
    if formats.json {
        for result in report.results.values() {
            for d in &result.documents {
                let text = serde_json::to_string(&d.body).map_err(|e| CliError::Io(e.to_string()))?;
                write(dir.join(format!("{}-{hash}.json", d.name)), text.as_bytes(), &mut files)?;
            }
        }
        let path = dir.join(format!("report-{hash}.json"));
        files.push(path.clone());
        report.artifacts = files.clone();
        let text = serde_json::to_string_pretty(&*report).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    } else {
        report.artifacts = files.clone();
    }
    Ok(files)
}
