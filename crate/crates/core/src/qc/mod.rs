//! Annotation quality control.
//!
//! - blind test questions hidden inside assignments ([`build_assignment`],
//!   [`judge_answer`], [`update_score_and_enforce`], [`recycle_units`])
//! - behavior monitoring over listening, editing and dwell signals
//!   ([`monitor_behavior`])
//! - real-time submission validation against configurable rules
//!   ([`validate_realtime`])
//! - acceptance sampling of the final delivery ([`plan_sample`],
//!   [`assess_delivery`])

mod assignment;
mod behavior;
mod judge;
mod profile;
mod recycle;
mod rules;
mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assignment::{
    build_assignment, AnnotatorView, AnswerKind, Assignment, AssignmentItem, ItemRef, SlotView,
    TestQuestion, WorkItemPayload,
};
pub use behavior::{
    apply_flags, monitor_behavior, BehaviorEvent, BehaviorFlag, BehaviorPolicy, FlagKind, Severity,
};
pub use judge::{judge_answer, normalize_tokens, word_edit_distance, word_error_rate, JudgePolicy};
pub use profile::{
    update_score_and_enforce, AnnotatorProfile, AnnotatorStatus, QcAction, RemovalPolicy,
};
pub use recycle::{recycle_units, AcceptedAnswer};
pub use rules::{
    compile_rules, validate_realtime, RuleKind, RuleSet, RuleViolation, ValidationRule,
};
pub use sampling::{
    assess_census, assess_delivery, draw_sample, plan_sample, sample_can_accept, wilson_bounds,
    QaAssessment, QaVerdict, SamplingPlan, ONE_SIDED_95_Z,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    #[error("test question pool exhausted for annotator {0}")]
    TqPoolExhausted(String),
    #[error("an assignment needs at least one work unit")]
    EmptyUnits,
    #[error("bad rule {rule_id}: {reason}")]
    BadRule { rule_id: String, reason: String },
    #[error("no audited units")]
    EmptyAudit,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Everything a job's quality control is configured with. Loaded from the QC
/// policy JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QcPolicy {
    /// Work units per assignment.
    pub assignment_size: usize,
    /// Hidden test questions per assignment.
    pub tq_per_assignment: usize,
    pub wer_tolerance: f64,
    pub removal_threshold: f64,
    pub min_attempts: u64,
    pub behavior: BehaviorPolicy,
    pub acceptance_threshold: f64,
    pub sampling_confidence: f64,
    pub sampling_margin: f64,
    pub assumed_proportion: f64,
    pub lease_minutes: u64,
    /// Whether recycled units keep their machine pre-labels.
    pub keep_prelabels_on_recycle: bool,
    pub rules: Vec<ValidationRule>,
}

impl Default for QcPolicy {
    fn default() -> Self {
        QcPolicy {
            assignment_size: 10,
            tq_per_assignment: 2,
            wer_tolerance: 0.10,
            removal_threshold: 0.80,
            min_attempts: 5,
            behavior: BehaviorPolicy::default(),
            acceptance_threshold: 0.95,
            sampling_confidence: 0.95,
            sampling_margin: 0.05,
            assumed_proportion: 0.5,
            lease_minutes: 30,
            keep_prelabels_on_recycle: true,
            rules: Vec::new(),
        }
    }
}

impl QcPolicy {
    pub fn judge(&self) -> JudgePolicy {
        JudgePolicy {
            wer_tolerance: self.wer_tolerance,
        }
    }

    pub fn removal(&self) -> RemovalPolicy {
        RemovalPolicy {
            removal_threshold: self.removal_threshold,
            min_attempts: self.min_attempts,
        }
    }
}
