//! Content-addressed stage results under `<out>/.cache`.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::results::StageResult;
use crate::{CliError, Stage, SCHEMA_VERSION};

#[derive(Serialize, Deserialize)]
struct Entry {
    schema_version: u32,
    config_hash: String,
    result: StageResult,
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(out: &Path) -> Self {
        Self { dir: out.join(".cache") }
    }

    pub fn path(&self, stage: Stage, hash: &str) -> PathBuf {
        self.dir.join(format!("{stage}-{hash}.json"))
    }

    /// The cached result, or `None` when absent, unreadable or written under
    /// another schema version.
    pub fn load(&self, stage: Stage, hash: &str) -> Option<StageResult> {
        let text = std::fs::read_to_string(self.path(stage, hash)).ok()?;
        let entry: Entry = serde_json::from_str(&text).ok()?;
        (entry.schema_version == SCHEMA_VERSION && entry.config_hash == hash && entry.result.stage == stage).then_some(entry.result)
    }

    /// Stores `result` unless it holds values JSON cannot carry.
    pub fn store(&self, hash: &str, result: &StageResult) -> Result<bool, CliError> {
        if !result.is_finite() {
            return Ok(false);
        }
        std::fs::create_dir_all(&self.dir)?;
        let entry = Entry { schema_version: SCHEMA_VERSION, config_hash: hash.into(), result: result.clone() };
        let text = serde_json::to_string(&entry).map_err(|e| CliError::Io(e.to_string()))?;
        let path = self.path(result.stage, hash);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &path)?;
        Ok(true)
    }
}
