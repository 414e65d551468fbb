use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::state::WorkUnit;
use crate::qc::{judge_answer, JudgePolicy, QaAssessment, QaVerdict, SamplingPlan};

/// One acceptance-sampling round over a finished job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub job_id: String,
    pub round: u32,
    pub plan: SamplingPlan,
    pub sample_ids: Vec<String>,
    pub failed_ids: Vec<String>,
    /// Every unit was audited because no sample of the planned size could
    /// have cleared the threshold.
    #[serde(default)]
    pub census: bool,
    pub assessment: QaAssessment,
    /// Units sent back for re-annotation (empty on Accept).
    pub requeued_ids: Vec<String>,
    pub at: u64,
}

impl QaReport {
    pub fn accepted(&self) -> bool {
        self.assessment.verdict == QaVerdict::Accept
    }
}

/// Manual auditor of sampled units. `None` means no verdict is available
/// for the unit yet.
pub trait Auditor {
    fn audit(&mut self, unit: &WorkUnit, answer: &str) -> Option<bool>;
}

impl<F: FnMut(&WorkUnit, &str) -> Option<bool>> Auditor for F {
    fn audit(&mut self, unit: &WorkUnit, answer: &str) -> Option<bool> {
        self(unit, answer)
    }
}

/// Verdicts supplied up front, keyed by unit id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerdictAuditor(pub BTreeMap<String, bool>);

impl Auditor for VerdictAuditor {
    fn audit(&mut self, unit: &WorkUnit, _answer: &str) -> Option<bool> {
        self.0.get(&unit.unit_id).copied()
    }
}

/// Compares the accepted answer against a reference transcript.
#[derive(Debug, Clone)]
pub struct ReferenceAuditor {
    pub references: BTreeMap<String, String>,
    pub policy: JudgePolicy,
}

impl Auditor for ReferenceAuditor {
    fn audit(&mut self, unit: &WorkUnit, answer: &str) -> Option<bool> {
        let truth = self.references.get(&unit.unit_id)?;
        Some(judge_answer(unit.payload.kind, answer, truth, &self.policy))
    }
}

/// Falls back to `second` when `first` has no verdict.
pub struct Chain<A, B>(pub A, pub B);

impl<A: Auditor, B: Auditor> Auditor for Chain<A, B> {
    fn audit(&mut self, unit: &WorkUnit, answer: &str) -> Option<bool> {
        self.0
            .audit(unit, answer)
            .or_else(|| self.1.audit(unit, answer))
    }
}
