//! Report schema. Everything here is written to `report.txt` as TOML and
//! must not depend on wall time or thread scheduling.

use limsup_core::cantortree::{BisectStep, LevelStats, MassBound};
use limsup_core::covering::{DilationReport, DropReason, SelectionResult, StepOutcome};
use limsup_core::localmeasure::BoundReport;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub status: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<CRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<DimensionReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailMark {
    pub n: usize,
    pub tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: String,
    pub delta: f64,
    pub r_max: f64,
    pub decreasing_ok: bool,
    pub divergence_ok: bool,
    pub lambda: f64,
    pub eta: f64,
    pub terms: usize,
    pub cantelli: Vec<TailMark>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub n_requested: usize,
    pub n_effective: usize,
    pub candidates: usize,
    pub below_cutoff: usize,
    pub selected: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub dropped_outside: usize,
    pub dropped_null: usize,
    pub captured: f64,
    pub captured_by_union: f64,
    pub total: f64,
    pub fraction: f64,
    pub success: bool,
    pub sound: bool,
}

impl SelectionSummary {
    pub fn new(res: &SelectionResult, candidates: usize, n_requested: usize, n_effective: usize, union: f64, sound: bool) -> Self {
        let count = |p: &dyn Fn(&StepOutcome) -> bool| res.trace.iter().filter(|s| p(&s.outcome)).count();
        Self {
            n_requested,
            n_effective,
            candidates,
            below_cutoff: res.below_cutoff,
            selected: res.selected.len(),
            accepted: count(&|o| matches!(o, StepOutcome::Accepted)),
            rejected: count(&|o| matches!(o, StepOutcome::Rejected { .. })),
            dropped_outside: count(&|o| {
                matches!(
                    o,
                    StepOutcome::Dropped {
                        reason: DropReason::OutsideTarget
                    }
                )
            }),
            dropped_null: count(&|o| {
                matches!(
                    o,
                    StepOutcome::Dropped {
                        reason: DropReason::NullBall
                    }
                )
            }),
            captured: res.captured,
            captured_by_union: union,
            total: res.total,
            fraction: res.fraction(),
            success: res.is_success(),
            sound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationSummary {
    pub eta: f64,
    pub checked: usize,
    pub worst: f64,
    pub violations: usize,
}

impl From<&DilationReport> for DilationSummary {
    fn from(d: &DilationReport) -> Self {
        Self {
            eta: d.eta,
            checked: d.checked,
            worst: d.worst,
            violations: d.violations.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSummary {
    pub atoms: usize,
    pub k: f64,
    pub k_ratio: f64,
    pub min_atom_radius: f64,
    pub bound: BoundReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub depth_requested: usize,
    pub depth_built: usize,
    pub nodes: usize,
    pub leaves: usize,
    pub shrunk_nodes: usize,
    pub mass_conservation_error: f64,
    pub children_separated: bool,
    pub rho_feasible: bool,
    pub children_in_tail: bool,
    pub levels: Vec<LevelStats>,
}

impl TreeSummary {
    pub fn invariants_hold(&self, mass_tol: f64) -> bool {
        self.mass_conservation_error <= mass_tol && self.children_separated && self.rho_feasible && self.children_in_tail
    }
}

/// Results for one value of `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CRun {
    pub c: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dilation: Option<DilationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_measure: Option<LocalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdp: Option<MassBound>,
}

impl CRun {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            status: "ok".into(),
            failure: None,
            selection: None,
            dilation: None,
            local_measure: None,
            tree: None,
            mdp: None,
        }
    }

    pub fn fail(&mut self, stage: &str, message: impl Into<String>) {
        self.status = "failed".into();
        self.failure = Some(StageFailure {
            stage: stage.into(),
            message: message.into(),
        });
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub from_index: usize,
    pub ks: Vec<u32>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub s_range: [f64; 2],
    pub c: f64,
    pub depth: usize,
    pub ceiling: f64,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub agreement: f64,
    pub agrees: bool,
    /// Largest `s` for which the last materialized ball still satisfies
    /// `f(r)/C ≥ (2r)^δ`; no positive verdict can sit above it.
    pub s_cap: f64,
    pub truncation_limited: bool,
    pub steps: Vec<BisectStep>,
}
