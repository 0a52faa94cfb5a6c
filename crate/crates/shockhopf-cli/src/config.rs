use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shockhopf::profiles::exemplar;
use shockhopf::returnmap::TruncationOrder;
use shockhopf::spaces::Grid1D;
use std::path::{Path, PathBuf};

use crate::{CliError, Stage};

/// Bumped whenever cached stage results change shape or meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CachePolicy {
    /// Reuse cached stage results and store new ones.
    Use,
    /// Recompute and overwrite.
    Refresh,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    /// Node count, odd so that `x = 0` is a node.
    pub points: usize,
}

impl GridConfig {
    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Grid1D::new(self.half_width, self.points).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Same window, half the spacing.
    pub fn refined(&self) -> GridConfig {
        GridConfig { half_width: self.half_width, points: 2 * self.points - 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsRange {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl EpsRange {
    pub fn values(&self) -> Vec<f64> {
        if self.samples == 1 {
            return vec![self.min];
        }
        (0..self.samples).map(|k| self.min + (self.max - self.min) * k as f64 / (self.samples - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Stop tolerance of the resummed right inverse.
    pub series: f64,
    /// Periodicity residual an orbit must reach.
    pub orbit: f64,
    /// Eigenpair residual the crossing pair must reach.
    pub eigen: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub order: TruncationOrder,
    /// `C₀`.
    pub constant: f64,
    /// Time steps per period.
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub speed: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub times: usize,
    /// `(α, β)` pairs of `∂_y^α ∂_t^β K`.
    pub orders: Vec<[usize; 2]>,
    /// Random `(x, t, y)` samples of the cancellation identity.
    pub identity_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResumConfig {
    pub speed: f64,
    pub period: f64,
    /// Terms of the naive norm series.
    pub naive_count: usize,
    /// Dyadic block starts of the signed series.
    pub cauchy_counts: Vec<usize>,
    /// Window and spacing of the model right inverse.
    pub half_width: f64,
    pub spacing: f64,
    pub max_terms: usize,
    /// Speed and largest count of the continuization remainder.
    pub continuization_speed: f64,
    pub continuization_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfConfig {
    /// Amplitudes of the normal-form branch.
    pub normal_form_a: Vec<f64>,
    /// Also solve the largest amplitude on the grid with half the spacing.
    pub grid_doubling: bool,
    /// Snapshots kept per orbit.
    pub snapshot_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderConfig {
    pub grid: GridConfig,
    pub xi_max: usize,
    pub crossing: Vec<i32>,
    pub a: f64,
    /// Window of the mode decay fits.
    pub decay_grid: GridConfig,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub exemplar: String,
    pub grid: GridConfig,
    pub eps: EpsRange,
    /// Amplitudes of the exemplar branch.
    pub a_samples: Vec<f64>,
    pub tolerances: Tolerances,
    pub truncation: TruncationConfig,
    pub output_dir: PathBuf,
    pub cache: CachePolicy,
    pub kernels: KernelConfig,
    pub resum: ResumConfig,
    pub hopf: HopfConfig,
    pub cylinder: CylinderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            exemplar: "exemplar2x2".into(),
            grid: GridConfig { half_width: 40.0, points: 1601 },
            eps: EpsRange { min: -0.01, max: 0.01, samples: 5 },
            a_samples: vec![0.0125, 0.025, 0.05],
            tolerances: Tolerances { series: 1e-6, orbit: 1e-6, eigen: 1e-8 },
            truncation: TruncationConfig { order: TruncationOrder::Linear, constant: 10.0, steps: 512 },
            output_dir: PathBuf::from("out"),
            cache: CachePolicy::Use,
            kernels: KernelConfig {
                speed: -3.0,
                t_min: 1.0,
                t_max: 1000.0,
                times: 13,
                orders: vec![[0, 0], [1, 0], [0, 1], [1, 1], [1, 2]],
                identity_samples: 10_000,
                seed: 7,
            },
            resum: ResumConfig {
                speed: -1.0,
                period: 1.0,
                naive_count: 4096,
                cauchy_counts: vec![16, 32, 64, 128, 256, 512, 1024, 2048, 4096],
                half_width: 160.0,
                spacing: 0.25,
                max_terms: 1 << 16,
                continuization_speed: -3.0,
                continuization_count: 256,
            },
            hopf: HopfConfig { normal_form_a: vec![0.01, 0.025, 0.05, 0.075, 0.1], grid_doubling: true, snapshot_every: 16 },
            cylinder: CylinderConfig {
                grid: GridConfig { half_width: 20.0, points: 401 },
                xi_max: 16,
                crossing: vec![1],
                a: 0.05,
                decay_grid: GridConfig { half_width: 20.0, points: 401 },
                frames: 4,
            },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn odd(name: &str, g: &GridConfig) -> Result<(), CliError> {
    if g.points % 2 == 1 && g.points >= 5 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name}.points must be odd and at least 5, got {}", g.points)))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if exemplar(&self.exemplar).is_none() {
            return Err(CliError::Config(format!("unknown exemplar {:?}", self.exemplar)));
        }
        odd("grid", &self.grid)?;
        odd("cylinder.grid", &self.cylinder.grid)?;
        odd("cylinder.decay_grid", &self.cylinder.decay_grid)?;
        positive("grid.half_width", self.grid.half_width)?;
        positive("tolerances.series", self.tolerances.series)?;
        positive("tolerances.orbit", self.tolerances.orbit)?;
        positive("tolerances.eigen", self.tolerances.eigen)?;
        positive("truncation.constant", self.truncation.constant)?;
        positive("kernels.t_min", self.kernels.t_min)?;
        positive("resum.period", self.resum.period)?;
        positive("resum.spacing", self.resum.spacing)?;
        if !(self.eps.min <= self.eps.max) || self.eps.samples == 0 {
            return Err(CliError::Config("eps range needs min <= max and at least one sample".into()));
        }
        if self.truncation.steps < 4 || self.truncation.steps % 2 == 1 {
            return Err(CliError::Config(format!("truncation.steps must be even and >= 4, got {}", self.truncation.steps)));
        }
        if self.a_samples.is_empty() || self.a_samples.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(CliError::Config("a_samples must be nonempty and positive".into()));
        }
        if self.kernels.t_max < 100.0 * self.kernels.t_min || self.kernels.times < 3 {
            return Err(CliError::Config("kernel times must span two decades with at least 3 samples".into()));
        }
        if self.cylinder.crossing.is_empty() || self.cylinder.crossing.len() > 2 {
            return Err(CliError::Config("cylinder.crossing needs 1 or 2 entries".into()));
        }
        Ok(())
    }

    /// Checks that the selected stages can run on this exemplar.
    pub fn validate_stages(&self, stages: &[Stage]) -> Result<(), CliError> {
        self.validate()?;
        let planted = self.exemplar == "exemplar2x2";
        for s in stages {
            if matches!(s, Stage::Hopf | Stage::Cylinder) && !planted {
                return Err(CliError::Config(format!("stage {s} needs the planted exemplar2x2, config has {:?}", self.exemplar)));
            }
        }
        Ok(())
    }

    /// SHA-256 over the computational content (output directory and cache
    /// policy excluded) and the schema version.
    pub fn hash(&self) -> String {
        let mut key = self.clone();
        key.output_dir = PathBuf::new();
        key.cache = CachePolicy::Use;
        let json = serde_json::to_string(&key).expect("configs serialize");
        let digest = Sha256::digest(format!("v{SCHEMA_VERSION}:{json}").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The first 12 hex digits of [`hash`](Self::hash), used in file names.
    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }
}
