use std::collections::BTreeMap;
use std::time::Instant;

use crate::cache::Cache;
use crate::config::{CachePolicy, RunConfig, SCHEMA_VERSION};
use crate::criteria::evaluate_criteria;
use crate::report::{RunReport, StageRecord, StageStatus};
use crate::stages::run_stage;
use crate::{library_exit_code, CliError, Stage};

/// Every stage, in order.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport, CliError> {
    run_stages(cfg, &Stage::ALL)
}

/// Runs `stages` in pipeline order. The config is validated before anything
/// is computed; a failing stage is recorded and the remaining ones still run.
pub fn run_stages(cfg: &RunConfig, stages: &[Stage]) -> Result<RunReport, CliError> {
    cfg.validate_stages(stages)?;
    let hash = cfg.hash();
    let cache = Cache::new(&cfg.output_dir);
    let mut records = Vec::new();
    let mut results = BTreeMap::new();
    for stage in Stage::ALL.into_iter().filter(|s| stages.contains(s)) {
        let start = Instant::now();
        let cached = if cfg.cache == CachePolicy::Use { cache.load(stage, &hash) } else { None };
        let (status, outcome) = match cached {
            Some(r) => (StageStatus::Cached, Ok(r)),
            None => (StageStatus::Computed, run_stage(stage, cfg)),
        };
        let seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok(r) => {
                if status == StageStatus::Computed && cfg.cache != CachePolicy::Off {
                    cache.store(&hash, &r)?;
                }
                records.push(StageRecord {
                    stage,
                    status,
                    seconds,
                    timings: r.timings.clone(),
                    constants: r.constants.clone(),
                    error: None,
                    exit_code: None,
                });
                results.insert(stage, r);
            }
            Err(e) => records.push(StageRecord {
                stage,
                status: StageStatus::Failed,
                seconds,
                timings: BTreeMap::new(),
                constants: BTreeMap::new(),
                error: Some(e.to_string()),
                exit_code: Some(library_exit_code(&e)),
            }),
        }
    }
    let criteria = evaluate_criteria(&results);
    Ok(RunReport { schema_version: SCHEMA_VERSION, config_hash: hash, stages: records, criteria, artifacts: Vec::new(), results })
}
