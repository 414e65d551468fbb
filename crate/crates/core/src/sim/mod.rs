//! Simulated annotator populations.
//!
//! A scenario describes a job (units with hidden true transcripts and
//! machine pre-labels of some accuracy) and a population of annotators with
//! an error model. [`run_scenario`] drives an in-memory orchestrator through
//! a discrete-event loop (fetch, work, submit), then runs the QA rounds with
//! a ground-truth auditor. Everything is a function of the scenario seed.
//!
//! Error model: on a slot with a wrong pre-label in assisted mode the
//! annotator copies it verbatim with probability `priming_bias`; otherwise
//! the answer is right with probability `base_accuracy` and a token-level
//! corruption of the truth when wrong. Time per slot is
//! `seconds_per_unit_scratch`, divided by `assisted_speedup` in assisted
//! mode.

mod ab;
mod run;
mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ab::{ab_compare, AbComparison, ArmSummary};
pub use run::{run_scenario, Simulation};
pub use world::{corrupt_transcript, random_transcript};

use crate::orchestrator::OrchestratorError;
use crate::pretag::PrelabelMode;
use crate::qc::QcPolicy;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAnnotatorParams {
    pub base_accuracy: f64,
    /// Extra probability of accepting a wrong pre-label as is.
    #[serde(default)]
    pub priming_bias: f64,
    #[serde(default = "default_seconds")]
    pub seconds_per_unit_scratch: f64,
    #[serde(default = "one")]
    pub assisted_speedup: f64,
    /// Probability of listening to a whole clip.
    #[serde(default = "one")]
    pub listen_discipline: f64,
    /// How many annotators share these parameters.
    #[serde(default = "one_count")]
    pub count: usize,
}

fn default_seconds() -> f64 {
    60.0
}

fn one() -> f64 {
    1.0
}

fn one_count() -> usize {
    1
}

impl SimAnnotatorParams {
    pub fn new(base_accuracy: f64) -> Self {
        SimAnnotatorParams {
            base_accuracy,
            priming_bias: 0.0,
            seconds_per_unit_scratch: default_seconds(),
            assisted_speedup: 1.0,
            listen_discipline: 1.0,
            count: 1,
        }
    }
}

/// Per-unit probability that the machine pre-label is right. The same value
/// serves as the pre-label confidence when the mode is gated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PretagAccuracy {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for PretagAccuracy {
    fn default() -> Self {
        PretagAccuracy::Fixed { value: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimJobConfig {
    pub units: usize,
    pub locale: String,
    pub clip_seconds: f64,
    /// Forced mode for every unit; `None` gates each unit on its pre-label
    /// confidence.
    pub prelabel_mode: Option<PrelabelMode>,
    pub tq_pool_size: usize,
    pub policy: QcPolicy,
}

impl Default for SimJobConfig {
    fn default() -> Self {
        SimJobConfig {
            units: 100,
            locale: "en-us".into(),
            clip_seconds: 8.0,
            prelabel_mode: None,
            tq_pool_size: 400,
            policy: QcPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub population: Vec<SimAnnotatorParams>,
    #[serde(default)]
    pub job: SimJobConfig,
    #[serde(default)]
    pub pretag_accuracy: PretagAccuracy,
    #[serde(default)]
    pub rng_seed: u64,
    /// Assignments each annotator may take; 0 for no limit.
    #[serde(default)]
    pub horizon: usize,
    /// Run acceptance-sampling rounds once every unit is accepted.
    #[serde(default = "yes")]
    pub finalize: bool,
    #[serde(default = "default_rounds")]
    pub max_qa_rounds: usize,
}

fn yes() -> bool {
    true
}

fn default_rounds() -> usize {
    20
}

impl SimScenario {
    pub fn new(population: Vec<SimAnnotatorParams>, rng_seed: u64) -> Self {
        SimScenario {
            population,
            job: SimJobConfig::default(),
            pretag_accuracy: PretagAccuracy::default(),
            rng_seed,
            horizon: 0,
            finalize: true,
            max_qa_rounds: default_rounds(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.population.iter().map(|p| p.count).sum::<usize>() == 0 {
            return bad("empty population".into());
        }
        for (i, p) in self.population.iter().enumerate() {
            for (name, v) in [
                ("base_accuracy", p.base_accuracy),
                ("priming_bias", p.priming_bias),
                ("listen_discipline", p.listen_discipline),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("population[{i}].{name} = {v} outside [0, 1]"));
                }
            }
            if p.seconds_per_unit_scratch.is_nan()
                || p.seconds_per_unit_scratch <= 0.0
                || p.assisted_speedup.is_nan()
                || p.assisted_speedup <= 0.0
            {
                return bad(format!("population[{i}] needs positive time parameters"));
            }
        }
        let acc_ok = match self.pretag_accuracy {
            PretagAccuracy::Fixed { value } => (0.0..=1.0).contains(&value),
            PretagAccuracy::Uniform { low, high } => 0.0 <= low && low <= high && high <= 1.0,
        };
        if !acc_ok {
            return bad("pretag accuracy outside [0, 1]".into());
        }
        if self.job.units == 0 {
            return bad("job needs at least one unit".into());
        }
        if self.job.clip_seconds.is_nan() || self.job.clip_seconds <= 0.0 {
            return bad("clip_seconds must be positive".into());
        }
        if self.job.tq_pool_size < self.job.policy.tq_per_assignment {
            return bad("test question pool smaller than one assignment's share".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalEvent {
    pub annotator_id: String,
    pub at_ms: u64,
    pub assignments_submitted: u64,
    pub tq_attempted: u64,
    pub quality_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeTiming {
    pub slots: u64,
    pub total_seconds: f64,
    pub mean_seconds_per_unit: f64,
    pub units_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRoundSummary {
    pub round: u32,
    pub accepted: bool,
    pub audited: u64,
    pub pass_rate: f64,
    pub wilson_lower: f64,
    pub requeued: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorOutcome {
    pub annotator_id: String,
    pub removed: bool,
    pub quality_score: f64,
    pub tq_attempted: u64,
    pub assignments_submitted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rng_seed: u64,
    pub units: usize,
    /// Every unit accepted (and, with finalization on, the job accepted).
    pub completed: bool,
    pub finalized: bool,
    pub removals: Vec<RemovalEvent>,
    pub flags: std::collections::BTreeMap<String, std::collections::BTreeMap<String, u64>>,
    /// Defect share of accepted answers when every unit was first accepted.
    pub first_pass_defect_rate: Option<f64>,
    /// Defect share of the accepted answers at the end of the run.
    pub final_defect_rate: Option<f64>,
    pub timing: std::collections::BTreeMap<String, ModeTiming>,
    pub qa_rounds: Vec<QaRoundSummary>,
    pub annotators: Vec<AnnotatorOutcome>,
    pub assignments: u64,
    pub lease_expiries: u64,
    pub end_ms: u64,
}

impl SimReport {
    pub fn mean_seconds(&self, mode: PrelabelMode) -> Option<f64> {
        self.timing
            .get(mode_key(mode))
            .filter(|t| t.slots > 0)
            .map(|t| t.mean_seconds_per_unit)
    }
}

pub fn mode_key(mode: PrelabelMode) -> &'static str {
    match mode {
        PrelabelMode::Assisted => "assisted",
        PrelabelMode::FromScratch => "from_scratch",
    }
}
