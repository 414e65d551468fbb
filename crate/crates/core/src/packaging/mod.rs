//! Dynamic packaging: pick a subset of audited utterances whose hours,
//! gender, noise and topic distributions match a request, keep every speaker
//! under the per-package cap, and write the subset out as a named dataset.

mod emit;
mod select;
mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, DatasetName};

pub use emit::{emit_dataset, PACKAGE_REPORT_DIR};
pub use select::{select_disjoint, select_subset};
pub use verify::{deviation_entries, verify_package, Achieved};

#[derive(Debug, Error)]
pub enum PackagingError {
    #[error("no eligible utterances")]
    EmptyEligiblePool,
    #[error("invalid packaging spec: {0}")]
    InvalidSpec(String),
    #[error("package misses its targets; force emission to write it anyway")]
    Infeasible,
    #[error("output directory {0} is locked by another emission")]
    Locked(PathBuf),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Requested distribution. Empty maps leave that axis unconstrained; an empty
/// accent set allows every accent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackagingSpec {
    pub target_hours: f64,
    #[serde(default)]
    pub topics_by_hours: BTreeMap<String, f64>,
    #[serde(default)]
    pub gender_proportion: BTreeMap<String, f64>,
    #[serde(default)]
    pub noise_proportion: BTreeMap<String, f64>,
    #[serde(default)]
    pub accents: BTreeSet<String>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub name: DatasetName,
    /// Pick whole sessions instead of single utterances.
    #[serde(default)]
    pub session_atomic: bool,
}

fn default_tolerance() -> f64 {
    0.05
}

impl PackagingSpec {
    pub fn validate(&self) -> Result<(), PackagingError> {
        let bad = |m: String| Err(PackagingError::InvalidSpec(m));
        if !(self.target_hours > 0.0 && self.target_hours.is_finite()) {
            return bad(format!(
                "target_hours must be positive, got {}",
                self.target_hours
            ));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return bad(format!(
                "tolerance must be non-negative, got {}",
                self.tolerance
            ));
        }
        for (axis, m) in [
            ("gender", &self.gender_proportion),
            ("noise", &self.noise_proportion),
        ] {
            if m.values().any(|v| !(0.0..=1.0).contains(v)) {
                return bad(format!("{axis} proportions must lie in [0, 1]"));
            }
            let sum: f64 = m.values().sum();
            if !m.is_empty() && (sum - 1.0).abs() > 1e-9 {
                return bad(format!("{axis} proportions sum to {sum}"));
            }
        }
        if self
            .topics_by_hours
            .values()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return bad("topic hours must be non-negative".into());
        }
        self.name.validate()?;
        Ok(())
    }
}

/// Which utterances may be packaged, beyond the spec's accent filter.
#[derive(Debug, Clone, PartialEq)]
pub struct PackagingOptions {
    /// Utterances that have passed final audit. `None` treats every corpus
    /// utterance as final.
    pub audited: Option<BTreeSet<String>>,
    /// Speakers already used elsewhere (disjoint packages).
    pub excluded_speakers: BTreeSet<String>,
    /// Speakers the speaker database marks as over the global cap.
    pub over_cap_speakers: BTreeSet<String>,
    /// Exact search runs when the number of distinct candidate selections is
    /// at most this. Zero disables it.
    pub exact_search_budget: u64,
    /// Upper bound on objective evaluations spent in local search.
    pub local_search_budget: u64,
}

impl Default for PackagingOptions {
    fn default() -> Self {
        PackagingOptions {
            audited: None,
            excluded_speakers: BTreeSet::new(),
            over_cap_speakers: BTreeSet::new(),
            exact_search_budget: 1 << 21,
            local_search_budget: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Greedy,
    Exact,
}

/// One constrained cell of the request, e.g. `gender` / `female`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisEntry {
    pub axis: String,
    pub key: String,
    pub target: f64,
    pub achieved: f64,
    /// Relative deviation `|achieved - target| / target` (absolute when the
    /// target is zero).
    pub deviation: f64,
}

impl AxisEntry {
    pub fn shortfall(&self) -> f64 {
        self.target - self.achieved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageResult {
    pub selected: Vec<String>,
    pub method: SelectionMethod,
    pub achieved: Achieved,
    /// Axis name to the largest deviation among its entries.
    pub deviations: BTreeMap<String, f64>,
    pub max_deviation: f64,
    pub speaker_minutes: BTreeMap<String, f64>,
    /// Entries outside tolerance; empty when the spec is satisfied.
    pub infeasibility: Vec<AxisEntry>,
}

impl PackageResult {
    pub fn satisfied(&self) -> bool {
        self.infeasibility.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageVerification {
    pub deviations: BTreeMap<String, f64>,
    pub entries: Vec<AxisEntry>,
    pub max_deviation: f64,
    pub satisfied: bool,
}
