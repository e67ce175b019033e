use amspace::dyson_phillips::EvolutionPath;
use amspace::extrapolation::Monotonicity;
use amspace::perturbation::SplitSchedule;
use amspace::DeschReport;
use serde::{Deserialize, Serialize};

use crate::config::Settings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub settings: Settings,
    pub desch: DeschReport,
    pub desch_sweep: Vec<DeschReport>,
    pub positivity: PositivityVerdicts,
    pub counterexample: Option<CounterexampleFields>,
    pub split: Option<SplitSummary>,
    pub evolution: Option<EvolutionSummary>,
    pub evolution_skipped: Option<String>,
    pub oracle: Option<OracleComparison>,
    pub periodic: Option<PeriodicChecks>,
    pub checks: Vec<Check>,
    /// Comma-separated plot files, or `none`.
    pub plots: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityVerdicts {
    pub is_positive_h: bool,
    pub weight_positive: bool,
    pub rb_positive_on_basis: bool,
    pub basis_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleFields {
    /// `‖R(0, A₋₁)h + g‖∞`
    pub resolvent_error_vs_minus_g: f64,
    pub error_bound: f64,
    pub minus_g_nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub schedule: SplitSchedule,
    /// `‖staged − single-stage‖∞` at each output time.
    pub staged_vs_single: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub time: f64,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub lambda_shift: f64,
    pub k: f64,
    pub path: EvolutionPath,
    pub terms_kept: usize,
    pub term_norms: Vec<f64>,
    pub tail_bound: f64,
    pub times: Vec<f64>,
    pub tail_bounds: Vec<f64>,
    pub path_discrepancy: Option<f64>,
    pub positivity_ok: Option<bool>,
    pub envelope_ok: bool,
    pub observed_ratio: Option<f64>,
    pub probes: Vec<ProbeRow>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicChecks {
    pub rotation_by_one_is_identity: bool,
    pub resolvent_of_constant_error: f64,
    pub direction_oracle: Option<Monotonicity>,
    pub direction_constant: Monotonicity,
    pub test_densities_agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }

    pub fn flag(name: &str, passed: bool) -> Self {
        Self {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
        }
    }
}
