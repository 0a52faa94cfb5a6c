//! Batch orchestration of the shockhopf experiments: configs, a cached
//! stage pipeline, acceptance criteria and report emission.

pub mod cache;
pub mod config;
pub mod criteria;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod results;
pub mod stages;
pub mod svg;

use serde::{Deserialize, Serialize};
use shockhopf::error::Error;
use std::fmt;
use std::str::FromStr;

pub use config::{CachePolicy, RunConfig, SCHEMA_VERSION};
pub use criteria::{evaluate_criteria, CriterionResult, Verdict};
pub use pipeline::{run_pipeline, run_stages};
pub use report::{emit_report, Formats, RunReport, StageRecord, StageStatus};
pub use results::{Heatmap, LinePlot, Plot, Series, StageResult, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Profile,
    Spectrum,
    Kernels,
    Resum,
    Hopf,
    Cylinder,
}

impl Stage {
    /// Execution order of a full run.
    pub const ALL: [Stage; 6] = [Stage::Profile, Stage::Spectrum, Stage::Kernels, Stage::Resum, Stage::Hopf, Stage::Cylinder];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Profile => "profile",
            Stage::Spectrum => "spectrum",
            Stage::Kernels => "kernels",
            Stage::Resum => "resum",
            Stage::Hopf => "hopf",
            Stage::Cylinder => "cylinder",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown stage {s:?}; expected one of profile, spectrum, kernels, resum, hopf, cylinder")))
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable configuration.
    Config(String),
    /// A stage failed inside the library.
    Stage { stage: Stage, source: Error },
    Io(String),
    /// Nothing to emit.
    EmptyReport,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Stage { stage, source } => write!(f, "stage {stage} failed: {source}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::EmptyReport => f.write_str("report has no stages"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Exit code class of a library error: 2 configuration, 3 violated numerical
/// assumption, 4 nonconvergence.
pub fn library_exit_code(e: &Error) -> i32 {
    match e {
        Error::AtSample { source, .. } => library_exit_code(source),
        Error::Configuration(_) | Error::Argument(_) | Error::Dimension(_) => 2,
        Error::NonConvergence(_) | Error::SeriesNonConvergence(_) | Error::RootNotFound(_) => 4,
        _ => 3,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } => library_exit_code(source),
            CliError::Io(_) | CliError::EmptyReport => 1,
        }
    }
}
