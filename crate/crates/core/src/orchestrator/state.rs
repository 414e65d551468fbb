use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::audit::QaReport;
use crate::pretag::{PrelabelMode, PretagBundle, RawSessionInput, Stage, UtteranceDraft};
use crate::qc::{
    AnnotatorProfile, Assignment, BehaviorEvent, QcPolicy, TestQuestion, WorkItemPayload,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitState {
    Queued,
    Leased,
    Submitted,
    Accepted,
    Recycled,
    Final,
}

impl UnitState {
    pub const ALL: [UnitState; 6] = [
        UnitState::Queued,
        UnitState::Leased,
        UnitState::Submitted,
        UnitState::Accepted,
        UnitState::Recycled,
        UnitState::Final,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UnitState::Queued => "queued",
            UnitState::Leased => "leased",
            UnitState::Submitted => "submitted",
            UnitState::Accepted => "accepted",
            UnitState::Recycled => "recycled",
            UnitState::Final => "final",
        }
    }

    /// Legal moves of the unit state machine. Besides the main path, an
    /// expired lease goes back to queued and an accepted unit can be recycled
    /// (annotator removal, QA rework).
    pub fn can_move_to(self, to: UnitState) -> bool {
        use UnitState::*;
        matches!(
            (self, to),
            (Queued, Leased)
                | (Leased, Submitted)
                | (Leased, Queued)
                | (Submitted, Accepted)
                | (Submitted, Recycled)
                | (Recycled, Queued)
                | (Accepted, Final)
                | (Accepted, Recycled)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: UnitState,
    pub to: UnitState,
    pub actor: String,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub unit_id: String,
    pub annotator_id: String,
    pub text: String,
    pub seq: u64,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkUnit {
    pub unit_id: String,
    pub job_id: String,
    pub session_id: String,
    pub payload: WorkItemPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft: Option<UtteranceDraft>,
    pub prelabel_mode: PrelabelMode,
    pub state: UnitState,
    /// Assignment currently holding the lease.
    pub lease: Option<String>,
    pub accepted: Option<AnswerRecord>,
    pub history: Vec<Transition>,
}

impl WorkUnit {
    pub fn was_recycled(&self) -> bool {
        self.history.iter().any(|t| t.to == UnitState::Recycled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub locale: String,
    pub guideline_version: String,
    pub policy: QcPolicy,
    pub tq_pool: Vec<TestQuestion>,
    pub unit_ids: Vec<String>,
    pub created_at: u64,
    /// Annotators that have received work in this job.
    #[serde(default)]
    pub roster: BTreeSet<String>,
    /// Submitted behavior events per annotator, in submission order.
    #[serde(default)]
    pub behavior: BTreeMap<String, Vec<BehaviorEvent>>,
    /// Current behavior flag counts per annotator.
    #[serde(default)]
    pub flags: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(default)]
    pub qa_rounds: Vec<QaReport>,
    #[serde(default)]
    pub finalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentStatus {
    Leased,
    Submitted,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotReject {
    pub slot_index: usize,
    pub unit_id: Option<String>,
    pub reasons: Vec<String>,
}

/// Full server-side result of one submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionOutcome {
    pub assignment_id: String,
    pub submission_id: String,
    pub annotator_id: String,
    pub accepted_units: Vec<String>,
    pub rejected: Vec<SlotReject>,
    /// Units re-queued because the annotator was removed.
    pub recycled_units: Vec<String>,
    pub tq_judged: u64,
    pub tq_correct: u64,
    pub quality_score: f64,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub assignment: Assignment,
    pub job_id: String,
    pub leased_at: u64,
    pub status: AssignmentStatus,
    #[serde(default)]
    pub pending_events: Vec<BehaviorEvent>,
    pub outcome: Option<SubmissionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkedSession {
    pub stage: Option<Stage>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub batches: u64,
    pub jobs: u64,
    pub assignments: u64,
    pub answers: u64,
}

/// The whole service state. Only [`State::apply`] mutates it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// Sequence number of the last applied batch.
    pub seq: u64,
    pub sessions: BTreeMap<String, RawSessionInput>,
    pub bundles: BTreeMap<String, PretagBundle>,
    pub parked: BTreeMap<String, ParkedSession>,
    pub annotators: BTreeMap<String, AnnotatorProfile>,
    pub jobs: BTreeMap<String, Job>,
    pub units: BTreeMap<String, WorkUnit>,
    pub assignments: BTreeMap<String, AssignmentRecord>,
    pub answers: Vec<AnswerRecord>,
    pub used_tqs: BTreeMap<String, BTreeSet<String>>,
    pub counters: Counters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Ingested {
        batch_id: String,
        inputs: Vec<RawSessionInput>,
    },
    PretagCompleted {
        bundle: Box<PretagBundle>,
    },
    SessionParked {
        session_id: String,
        stage: Option<Stage>,
        reason: String,
    },
    QualificationSet {
        annotator_id: String,
        locale: String,
        qualified: bool,
    },
    JobCreated {
        job: Box<Job>,
        units: Vec<WorkUnit>,
    },
    AssignmentLeased {
        job_id: String,
        assignment: Box<Assignment>,
        at: u64,
    },
    TqsUsed {
        annotator_id: String,
        tq_ids: Vec<String>,
    },
    UnitTransitioned {
        unit_id: String,
        to: UnitState,
        actor: String,
        at: u64,
        lease: Option<String>,
    },
    LeaseExpired {
        assignment_id: String,
        at: u64,
    },
    BehaviorStored {
        assignment_id: String,
        events: Vec<BehaviorEvent>,
    },
    AssignmentSubmitted {
        assignment_id: String,
        outcome: Box<SubmissionOutcome>,
        events: Vec<BehaviorEvent>,
    },
    AnswerAccepted {
        record: AnswerRecord,
    },
    ProfileUpdated {
        profile: AnnotatorProfile,
    },
    FlagsUpdated {
        job_id: String,
        flags: BTreeMap<String, BTreeMap<String, u64>>,
    },
    QaRoundRecorded {
        job_id: String,
        report: Box<QaReport>,
    },
    JobFinalized {
        job_id: String,
        at: u64,
    },
}

fn missing(what: &str, id: &str) -> String {
    format!("{what} `{id}` does not exist")
}

impl State {
    /// Folds one event into the state. Errors mean the event stream is not
    /// one this service could have produced.
    pub fn apply(&mut self, event: Event) -> Result<(), String> {
        match event {
            Event::Ingested { inputs, .. } => {
                self.counters.batches += 1;
                for input in inputs {
                    self.sessions
                        .entry(input.session_id.clone())
                        .or_insert(input);
                }
            }
            Event::PretagCompleted { bundle } => {
                self.parked.remove(&bundle.session_id);
                self.bundles.insert(bundle.session_id.clone(), *bundle);
            }
            Event::SessionParked {
                session_id,
                stage,
                reason,
            } => {
                self.parked
                    .insert(session_id, ParkedSession { stage, reason });
            }
            Event::QualificationSet {
                annotator_id,
                locale,
                qualified,
            } => {
                let p = self
                    .annotators
                    .entry(annotator_id.clone())
                    .or_insert_with(|| AnnotatorProfile::new(&annotator_id, &locale));
                p.locale = locale;
                p.qualified = qualified;
            }
            Event::JobCreated { job, units } => {
                if self.jobs.contains_key(&job.job_id) {
                    return Err(format!("job `{}` already exists", job.job_id));
                }
                self.counters.jobs += 1;
                for u in units {
                    if self.units.contains_key(&u.unit_id) {
                        return Err(format!("unit `{}` already exists", u.unit_id));
                    }
                    self.units.insert(u.unit_id.clone(), u);
                }
                self.jobs.insert(job.job_id.clone(), *job);
            }
            Event::AssignmentLeased {
                job_id,
                assignment,
                at,
            } => {
                let job = self
                    .jobs
                    .get_mut(&job_id)
                    .ok_or_else(|| missing("job", &job_id))?;
                job.roster.insert(assignment.annotator_id.clone());
                self.counters.assignments += 1;
                self.assignments.insert(
                    assignment.assignment_id.clone(),
                    AssignmentRecord {
                        assignment: *assignment,
                        job_id,
                        leased_at: at,
                        status: AssignmentStatus::Leased,
                        pending_events: Vec::new(),
                        outcome: None,
                    },
                );
            }
            Event::TqsUsed {
                annotator_id,
                tq_ids,
            } => {
                self.used_tqs
                    .entry(annotator_id)
                    .or_default()
                    .extend(tq_ids);
            }
            Event::UnitTransitioned {
                unit_id,
                to,
                actor,
                at,
                lease,
            } => {
                let unit = self
                    .units
                    .get_mut(&unit_id)
                    .ok_or_else(|| missing("unit", &unit_id))?;
                if !unit.state.can_move_to(to) {
                    return Err(format!(
                        "unit `{unit_id}` cannot move {:?} -> {to:?}",
                        unit.state
                    ));
                }
                unit.history.push(Transition {
                    from: unit.state,
                    to,
                    actor,
                    at,
                });
                unit.state = to;
                unit.lease = lease;
                if to == UnitState::Recycled {
                    unit.accepted = None;
                }
            }
            Event::LeaseExpired { assignment_id, .. } => {
                let rec = self
                    .assignments
                    .get_mut(&assignment_id)
                    .ok_or_else(|| missing("assignment", &assignment_id))?;
                rec.status = AssignmentStatus::Expired;
            }
            Event::BehaviorStored {
                assignment_id,
                events,
            } => {
                let rec = self
                    .assignments
                    .get_mut(&assignment_id)
                    .ok_or_else(|| missing("assignment", &assignment_id))?;
                for e in events {
                    rec.pending_events.retain(|p| p.slot_index != e.slot_index);
                    rec.pending_events.push(e);
                }
                rec.pending_events.sort_by_key(|e| e.slot_index);
            }
            Event::AssignmentSubmitted {
                assignment_id,
                outcome,
                events,
            } => {
                let rec = self
                    .assignments
                    .get_mut(&assignment_id)
                    .ok_or_else(|| missing("assignment", &assignment_id))?;
                rec.status = AssignmentStatus::Submitted;
                rec.outcome = Some(*outcome);
                rec.pending_events.clear();
                let annotator = rec.assignment.annotator_id.clone();
                let job_id = rec.job_id.clone();
                let job = self
                    .jobs
                    .get_mut(&job_id)
                    .ok_or_else(|| missing("job", &job_id))?;
                job.behavior.entry(annotator).or_default().extend(events);
            }
            Event::AnswerAccepted { record } => {
                let unit = self
                    .units
                    .get_mut(&record.unit_id)
                    .ok_or_else(|| missing("unit", &record.unit_id))?;
                unit.accepted = Some(record.clone());
                self.counters.answers = self.counters.answers.max(record.seq);
                self.answers.push(record);
            }
            Event::ProfileUpdated { profile } => {
                self.annotators
                    .insert(profile.annotator_id.clone(), profile);
            }
            Event::FlagsUpdated { job_id, flags } => {
                let job = self
                    .jobs
                    .get_mut(&job_id)
                    .ok_or_else(|| missing("job", &job_id))?;
                let touched: BTreeSet<String> =
                    job.flags.keys().chain(flags.keys()).cloned().collect();
                job.flags = flags;
                for annotator in touched {
                    let mut total: BTreeMap<String, u64> = BTreeMap::new();
                    for j in self.jobs.values() {
                        for (kind, n) in j.flags.get(&annotator).into_iter().flatten() {
                            *total.entry(kind.clone()).or_default() += n;
                        }
                    }
                    if let Some(p) = self.annotators.get_mut(&annotator) {
                        p.behavior_flags = total;
                    }
                }
            }
            Event::QaRoundRecorded { job_id, report } => {
                let job = self
                    .jobs
                    .get_mut(&job_id)
                    .ok_or_else(|| missing("job", &job_id))?;
                job.qa_rounds.push(*report);
            }
            Event::JobFinalized { job_id, .. } => {
                let job = self
                    .jobs
                    .get_mut(&job_id)
                    .ok_or_else(|| missing("job", &job_id))?;
                job.finalized = true;
            }
        }
        Ok(())
    }

    pub fn units_of<'a>(&'a self, job: &'a Job) -> impl Iterator<Item = &'a WorkUnit> + 'a {
        job.unit_ids.iter().filter_map(|id| self.units.get(id))
    }

    /// Live lease held by `annotator` in `job`, if any.
    pub fn live_lease(&self, job_id: &str, annotator: &str) -> Option<&AssignmentRecord> {
        self.assignments.values().find(|r| {
            r.status == AssignmentStatus::Leased
                && r.job_id == job_id
                && r.assignment.annotator_id == annotator
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_machine() {
        use UnitState::*;
        assert!(Queued.can_move_to(Leased));
        assert!(Leased.can_move_to(Queued));
        assert!(Accepted.can_move_to(Final));
        assert!(!Queued.can_move_to(Accepted));
        assert!(!Final.can_move_to(Queued));
        assert!(!Submitted.can_move_to(Queued));
    }
}
