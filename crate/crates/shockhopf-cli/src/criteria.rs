//! The eleven acceptance criteria, evaluated from stage constants.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::results::StageResult;
use crate::Stage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// A required stage did not run or a value is missing.
    NotRun,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotRun => "NOT RUN",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub verdict: Verdict,
    /// Measured values with the bound each is held to.
    pub measured: BTreeMap<String, f64>,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("criterion {:>2} {:<38} {:<7} {}", self.id, self.name, self.verdict.to_string(), self.detail)
    }
}

pub const NAMES: [&str; 11] = [
    "kernel decay laws",
    "conditional vs absolute convergence",
    "cancellation identity",
    "simpson continuization",
    "mass escape",
    "hopf normal-form oracle",
    "end-to-end 1-D orbit",
    "zero eigenstructure",
    "burgers profile",
    "multi-d gap and cellular orbit",
    "determinism",
];

/// One check: `measured` compared against a closed interval.
struct Check {
    label: String,
    value: Option<f64>,
    lo: f64,
    hi: f64,
}

fn within(label: &str, value: Option<f64>, lo: f64, hi: f64) -> Check {
    Check { label: label.into(), value, lo, hi }
}

fn at_most(label: &str, value: Option<f64>, hi: f64) -> Check {
    within(label, value, f64::NEG_INFINITY, hi)
}

fn near(label: &str, value: Option<f64>, target: f64, tol: f64) -> Check {
    within(label, value, target - tol, target + tol)
}

fn judge(id: u8, checks: Vec<Check>) -> CriterionResult {
    let mut measured = BTreeMap::new();
    let mut parts = Vec::new();
    let mut verdict = Verdict::Pass;
    for c in &checks {
        match c.value {
            None => {
                verdict = Verdict::NotRun;
                parts.push(format!("{}=n/a", c.label));
            }
            Some(v) => {
                measured.insert(c.label.clone(), v);
                let ok = v >= c.lo && v <= c.hi;
                if !ok && verdict == Verdict::Pass {
                    verdict = Verdict::Fail;
                }
                let bound = match (c.lo.is_finite(), c.hi.is_finite()) {
                    (true, true) => format!("in [{:.4}, {:.4}]", c.lo, c.hi),
                    (false, true) => format!("<= {:e}", c.hi),
                    _ => format!(">= {:e}", c.lo),
                };
                parts.push(format!("{}={v:.4e} ({bound}){}", c.label, if ok { "" } else { " !" }));
            }
        }
    }
    if checks.iter().any(|c| c.value.is_none()) {
        verdict = Verdict::NotRun;
    }
    CriterionResult { id, name: NAMES[id as usize - 1].into(), verdict, measured, detail: parts.join(", ") }
}

/// Evaluates criteria 1 to 10. Criterion 11 compares two runs and is filled
/// in by [`crate::report::emit_report`].
pub fn evaluate_criteria(results: &BTreeMap<Stage, StageResult>) -> Vec<CriterionResult> {
    let c = |s: Stage, k: &str| results.get(&s).and_then(|r| r.get(k));
    let t = |s: Stage, k: &str| results.get(&s).and_then(|r| r.timings.get(k).copied());
    let mut out = vec![
        judge(1, vec![at_most("max_exponent_error", c(Stage::Kernels, "max_exponent_error"), 0.03), at_most("seconds", t(Stage::Kernels, "laws"), 20.0)]),
        judge(
            2,
            vec![
                near("naive_growth", c(Stage::Resum, "naive_growth"), 0.25, 0.05),
                near("cauchy_slope", c(Stage::Resum, "cauchy_slope"), -0.25, 0.05),
                at_most("seconds", t(Stage::Resum, "series"), 30.0),
            ],
        ),
        judge(
            3,
            vec![
                at_most("cancellation_residual", c(Stage::Kernels, "cancellation_residual"), 1e-10),
                at_most("ledger_residual", c(Stage::Resum, "ledger_residual"), 1e-6),
            ],
        ),
        judge(4, vec![near("simpson_tail_slope", c(Stage::Resum, "simpson_tail_slope"), -1.75, 0.1)]),
        judge(
            5,
            vec![
                at_most("partial_mass_max", c(Stage::Resum, "partial_mass_max"), 1e-8),
                within("abs_b_mass", c(Stage::Resum, "b_mass").map(f64::abs), 1e-6, f64::INFINITY),
            ],
        ),
        judge(
            6,
            vec![
                at_most("nf_oracle_error", c(Stage::Hopf, "nf_oracle_error"), 1e-3),
                near("nf_direction", c(Stage::Hopf, "nf_direction"), 1.0, 0.0),
                near("nf_sub_direction", c(Stage::Hopf, "nf_sub_direction"), -1.0, 0.0),
                near("nf_sub_oracle_sign", c(Stage::Hopf, "nf_sub_oracle_sign"), -1.0, 0.0),
                at_most("seconds", t(Stage::Hopf, "normal_form"), 10.0),
            ],
        ),
        judge(
            7,
            vec![
                at_most("max_periodicity", c(Stage::Hopf, "max_periodicity"), 1e-6),
                at_most("period_intercept_error", c(Stage::Hopf, "period_intercept_error"), 1e-3),
                at_most("amplitude_drift", c(Stage::Hopf, "amplitude_drift"), 0.25),
                within("truncation_ratio", c(Stage::Hopf, "truncation_ratio"), 0.0, 1.0 - 1e-12),
                within("grid_doubling_change", c(Stage::Hopf, "grid_doubling_change"), 0.0, 0.05 - 1e-15),
                at_most("seconds", t(Stage::Hopf, "orbits"), 600.0),
            ],
        ),
        judge(
            8,
            vec![
                at_most("pair_mass", c(Stage::Spectrum, "pair_mass"), 1e-8),
                at_most("zero_mode_residual", c(Stage::Spectrum, "zero_mode_residual"), 1e-6),
                at_most("projector_idempotence", c(Stage::Spectrum, "projector_idempotence"), 1e-10),
            ],
        ),
        judge(
            9,
            vec![
                at_most("burgers_tanh_error", c(Stage::Profile, "burgers_tanh_error"), 1e-6),
                near("burgers_decay_rate", c(Stage::Profile, "burgers_decay_rate"), 1.0, 0.02),
                at_most("seconds", t(Stage::Profile, "burgers"), 1.0),
            ],
        ),
        judge(
            10,
            vec![
                within("gap_ratio_1", c(Stage::Cylinder, "gap_ratio_1"), 0.5, 2.0),
                within("gap_ratio_2", c(Stage::Cylinder, "gap_ratio_2"), 0.5, 2.0),
                at_most("planar_rate_fraction", c(Stage::Cylinder, "planar_rate_fraction"), 0.1),
                at_most("periodicity", c(Stage::Cylinder, "periodicity"), 1e-6),
                at_most("shape_residual", c(Stage::Cylinder, "shape_residual"), 0.05),
                at_most("seconds", t(Stage::Cylinder, "cylinder"), 1200.0),
            ],
        ),
    ];
    out.push(CriterionResult { id: 11, name: NAMES[10].into(), verdict: Verdict::NotRun, measured: BTreeMap::new(), detail: "needs a previous run".into() });
    out
}

/// Criterion 11 from the number of CSV files compared and the ones that differ.
pub fn determinism(compared: usize, differing: &[String]) -> CriterionResult {
    let mut measured = BTreeMap::new();
    measured.insert("compared".into(), compared as f64);
    measured.insert("differing".into(), differing.len() as f64);
    let (verdict, detail) = if compared == 0 {
        (Verdict::NotRun, "no previous CSV digests to compare".to_string())
    } else if differing.is_empty() {
        (Verdict::Pass, format!("{compared} CSV files bit-identical to the previous run"))
    } else {
        (Verdict::Fail, format!("differing: {}", differing.join(", ")))
    };
    CriterionResult { id: 11, name: NAMES[10].into(), verdict, measured, detail }
}
