use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::audit::{Auditor, QaReport};
use super::clock::Clock;
use super::state::{
    AnswerRecord, AssignmentRecord, AssignmentStatus, Event, Job, SlotReject, State,
    SubmissionOutcome, UnitState, WorkUnit,
};
use super::store::{Appended, CrashPlan, EventStore, LogRecord, REPORTS_DIR};
use super::OrchestratorError;
use crate::corpus::{load_corpus, DatasetManifest};
use crate::packaging::{
    emit_dataset, select_subset, PackageResult, PackagingOptions, PackagingSpec,
};
use crate::pretag::{
    run_batch, AdapterSet, GatingPolicy, PipelineConfig, PrelabelMode, RawSessionInput, Routing,
};
use crate::qc::{
    assess_census, assess_delivery, build_assignment, compile_rules, draw_sample, judge_answer,
    monitor_behavior, plan_sample, recycle_units, sample_can_accept, update_score_and_enforce,
    validate_realtime, AcceptedAnswer, AnnotatorProfile, AnnotatorStatus, AnswerKind, Assignment,
    BehaviorEvent, FlagKind, ItemRef, QaVerdict, QcAction, QcPolicy, RuleSet, TestQuestion,
    WorkItemPayload,
};

type Result<T> = std::result::Result<T, OrchestratorError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Root of every seeded choice the service makes.
    pub seed: u64,
    /// Write a snapshot every this many batches (file stores only, 0 = never).
    pub snapshot_every: u64,
    /// fsync after every append.
    pub sync: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            seed: 0,
            snapshot_every: 256,
            sync: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReceipt {
    /// `None` when the batch added nothing.
    pub batch_id: Option<String>,
    pub ingested: Vec<String>,
    pub duplicates: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PretagSummary {
    pub completed: Vec<String>,
    pub rejected: Vec<String>,
    pub parked: BTreeMap<String, String>,
}

/// A unit supplied directly instead of derived from a pre-tagged session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSpec {
    pub unit_id: String,
    pub session_id: String,
    pub payload: WorkItemPayload,
    #[serde(default)]
    pub prelabel_mode: Option<PrelabelMode>,
    /// Must equal the job locale when given.
    #[serde(default)]
    pub locale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    #[serde(default)]
    pub job_id: Option<String>,
    pub locale: String,
    #[serde(default = "default_guideline")]
    pub guideline_version: String,
    #[serde(default)]
    pub policy: QcPolicy,
    #[serde(default)]
    pub tq_pool: Vec<TestQuestion>,
    /// Pre-tagged sessions whose drafts become units.
    #[serde(default)]
    pub sessions: Vec<String>,
    #[serde(default)]
    pub units: Vec<UnitSpec>,
}

fn default_guideline() -> String {
    "v1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAnswer {
    pub token: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubmitRequest {
    #[serde(default)]
    pub submission_id: Option<String>,
    pub answers: Vec<SlotAnswer>,
    #[serde(default)]
    pub events: Vec<BehaviorEvent>,
    /// Caller identity (the annotator-id header), checked when present.
    #[serde(skip)]
    pub annotator_id: Option<String>,
}

/// What the annotator is told after submitting: nothing that singles out a
/// test question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionReceipt {
    pub assignment_id: String,
    pub submission_id: String,
    pub status: AnnotatorStatus,
    pub quality_score: f64,
    pub slot_messages: BTreeMap<usize, Vec<String>>,
}

impl SubmissionOutcome {
    pub fn receipt(&self) -> SubmissionReceipt {
        SubmissionReceipt {
            assignment_id: self.assignment_id.clone(),
            submission_id: self.submission_id.clone(),
            status: if self.removed {
                AnnotatorStatus::Removed
            } else {
                AnnotatorStatus::Active
            },
            quality_score: self.quality_score,
            slot_messages: self
                .rejected
                .iter()
                .map(|r| (r.slot_index, r.reasons.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorSummary {
    pub annotator_id: String,
    pub status: AnnotatorStatus,
    pub quality_score: f64,
    pub tq_attempted: u64,
    pub behavior_flags: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub locale: String,
    pub guideline_version: String,
    pub total_units: usize,
    pub units_by_state: BTreeMap<String, usize>,
    pub live_leases: usize,
    pub roster: Vec<AnnotatorSummary>,
    pub qa_rounds: Vec<QaReport>,
    pub finalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageRequest {
    pub spec: PackagingSpec,
    /// Corpus directory; defaults to `<store>/corpus`.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Output directory; defaults to `<store>/packages/<dataset name>`. No
    /// emission without one.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageResponse {
    pub result: PackageResult,
    pub manifest: Option<DatasetManifest>,
    pub out: Option<PathBuf>,
}

struct Inner {
    state: State,
    store: EventStore,
    clock: Arc<dyn Clock>,
    config: ServiceConfig,
    crashed: bool,
    rules: HashMap<String, RuleSet>,
}

/// The orchestrator service. Cheap to share behind an `Arc`.
pub struct Orchestrator {
    inner: Mutex<Inner>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn transition(unit_id: &str, to: UnitState, actor: &str, at: u64, lease: Option<String>) -> Event {
    Event::UnitTransitioned {
        unit_id: unit_id.to_string(),
        to,
        actor: actor.to_string(),
        at,
        lease,
    }
}

fn requeue(unit_id: &str, actor: &str, at: u64, out: &mut Vec<Event>) {
    out.push(transition(unit_id, UnitState::Recycled, actor, at, None));
    out.push(transition(unit_id, UnitState::Queued, actor, at, None));
}

fn locale_matches(routing: &Routing, locale: &str) -> bool {
    match routing {
        Routing::Accepted { language, accent } => {
            language.eq_ignore_ascii_case(locale)
                || accent
                    .as_deref()
                    .is_some_and(|a| a.eq_ignore_ascii_case(locale))
        }
        _ => false,
    }
}

impl Inner {
    fn commit(&mut self, events: Vec<Event>) -> Result<()> {
        if self.crashed {
            return Err(OrchestratorError::Crashed);
        }
        if events.is_empty() {
            return Ok(());
        }
        let record = LogRecord {
            seq: self.state.seq + 1,
            events,
        };
        let appended = match self.store.append(&record) {
            Ok(a) => a,
            Err(e) => {
                self.crashed = true;
                return Err(e);
            }
        };
        for event in record.events {
            if let Err(e) = self.state.apply(event) {
                self.crashed = true;
                return Err(OrchestratorError::Corrupt(e));
            }
        }
        self.state.seq = record.seq;
        if appended == Appended::DurableThenCrash {
            self.crashed = true;
            return Err(OrchestratorError::Crashed);
        }
        if self.config.snapshot_every > 0
            && self.state.seq.is_multiple_of(self.config.snapshot_every)
        {
            self.store.write_snapshot(&self.state)?;
        }
        Ok(())
    }

    fn expire(&mut self, now: u64) -> Result<Vec<String>> {
        let mut events = Vec::new();
        let mut expired = Vec::new();
        for (id, rec) in &self.state.assignments {
            if rec.status != AssignmentStatus::Leased || rec.assignment.lease_expiry > now {
                continue;
            }
            expired.push(id.clone());
            events.push(Event::LeaseExpired {
                assignment_id: id.clone(),
                at: now,
            });
            for unit_id in rec.assignment.unit_ids() {
                let leased_here = self.state.units.get(unit_id).is_some_and(|u| {
                    u.state == UnitState::Leased && u.lease.as_deref() == Some(id.as_str())
                });
                if leased_here {
                    events.push(transition(unit_id, UnitState::Queued, "system", now, None));
                }
            }
        }
        self.commit(events)?;
        Ok(expired)
    }

    fn rules_for(&mut self, job_id: &str) -> Result<()> {
        if !self.rules.contains_key(job_id) {
            let job = self
                .state
                .jobs
                .get(job_id)
                .ok_or_else(|| OrchestratorError::UnknownJob(job_id.to_string()))?;
            let compiled = compile_rules(&job.policy.rules)?;
            self.rules.insert(job_id.to_string(), compiled);
        }
        Ok(())
    }
}

impl Orchestrator {
    /// Opens a store directory, recovering state from its snapshot and log.
    pub fn open(
        root: impl AsRef<Path>,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self> {
        let (store, state) = EventStore::open(root.as_ref(), config.sync)?;
        Ok(Self::with_store(store, state, config, clock))
    }

    /// A service whose log lives in memory only.
    pub fn ephemeral(config: ServiceConfig, clock: Arc<dyn Clock>) -> Self {
        Self::with_store(EventStore::memory(), State::default(), config, clock)
    }

    fn with_store(
        store: EventStore,
        state: State,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Orchestrator {
            inner: Mutex::new(Inner {
                state,
                store,
                clock,
                config,
                crashed: false,
                rules: HashMap::new(),
            }),
        }
    }

    fn lock(&self) -> Result<MutexGuard<'_, Inner>> {
        let g = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        if g.crashed {
            return Err(OrchestratorError::Crashed);
        }
        Ok(g)
    }

    fn guard(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn inject_crash(&self, plan: Option<CrashPlan>) {
        self.guard().store.inject_crash(plan);
    }

    pub fn is_crashed(&self) -> bool {
        self.guard().crashed
    }

    /// Consistent copy of the live state.
    pub fn state(&self) -> State {
        self.guard().state.clone()
    }

    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        f(&self.guard().state)
    }

    pub fn log_lines(&self) -> Result<Vec<String>> {
        self.guard().store.lines()
    }

    pub fn root(&self) -> Option<PathBuf> {
        self.guard().store.root().map(Path::to_path_buf)
    }

    pub fn now(&self) -> u64 {
        self.guard().clock.now_ms()
    }

    pub fn snapshot(&self) -> Result<()> {
        let g = self.lock()?;
        g.store.write_snapshot(&g.state)
    }

    /// Stores new sessions; known session ids are skipped.
    pub fn ingest(&self, inputs: Vec<RawSessionInput>) -> Result<IngestReceipt> {
        let mut g = self.lock()?;
        let mut seen = BTreeSet::new();
        let mut fresh = Vec::new();
        let mut duplicates = Vec::new();
        for input in inputs {
            if g.state.sessions.contains_key(&input.session_id)
                || !seen.insert(input.session_id.clone())
            {
                duplicates.push(input.session_id);
            } else {
                fresh.push(input);
            }
        }
        if fresh.is_empty() {
            return Ok(IngestReceipt {
                batch_id: None,
                ingested: Vec::new(),
                duplicates,
            });
        }
        let batch_id = format!("batch{:05}", g.state.counters.batches + 1);
        let ingested = fresh.iter().map(|i| i.session_id.clone()).collect();
        g.commit(vec![Event::Ingested {
            batch_id: batch_id.clone(),
            inputs: fresh,
        }])?;
        Ok(IngestReceipt {
            batch_id: Some(batch_id),
            ingested,
            duplicates,
        })
    }

    /// Runs the pre-tagging pipeline on every session without a bundle. The
    /// lock is released while adapters run.
    pub fn run_pretag(
        &self,
        adapters: &AdapterSet,
        gating: &GatingPolicy,
        config: &PipelineConfig,
        workers: usize,
    ) -> Result<PretagSummary> {
        let pending: Vec<RawSessionInput> = {
            let g = self.lock()?;
            g.state
                .sessions
                .values()
                .filter(|s| !g.state.bundles.contains_key(&s.session_id))
                .cloned()
                .collect()
        };
        let results = run_batch(&pending, adapters, gating, config, workers);
        let mut summary = PretagSummary::default();
        let mut events = Vec::new();
        for (input, result) in pending.iter().zip(results) {
            match result {
                Ok(bundle) => {
                    if bundle.routing.is_accepted() {
                        summary.completed.push(input.session_id.clone());
                    } else {
                        summary.rejected.push(input.session_id.clone());
                    }
                    events.push(Event::PretagCompleted {
                        bundle: Box::new(bundle),
                    });
                }
                Err(e) => {
                    summary
                        .parked
                        .insert(input.session_id.clone(), e.to_string());
                    events.push(Event::SessionParked {
                        session_id: input.session_id.clone(),
                        stage: e.stage(),
                        reason: e.to_string(),
                    });
                }
            }
        }
        self.lock()?.commit(events)?;
        Ok(summary)
    }

    /// Operator endpoint: marks an annotator (created on first use) as
    /// qualified or not for a locale.
    pub fn set_qualification(
        &self,
        annotator_id: &str,
        locale: &str,
        qualified: bool,
    ) -> Result<AnnotatorProfile> {
        if annotator_id.is_empty() {
            return Err(OrchestratorError::InvalidRequest(
                "empty annotator id".into(),
            ));
        }
        let mut g = self.lock()?;
        g.commit(vec![Event::QualificationSet {
            annotator_id: annotator_id.to_string(),
            locale: locale.to_string(),
            qualified,
        }])?;
        Ok(g.state.annotators[annotator_id].clone())
    }

    pub fn create_job(&self, req: JobRequest) -> Result<String> {
        let mut g = self.lock()?;
        let now = g.clock.now_ms();
        compile_rules(&req.policy.rules)?;
        if req.policy.assignment_size == 0 {
            return Err(OrchestratorError::InvalidRequest(
                "assignment_size must be positive".into(),
            ));
        }
        let job_id = req
            .job_id
            .clone()
            .unwrap_or_else(|| format!("job{:04}", g.state.counters.jobs + 1));
        if g.state.jobs.contains_key(&job_id) {
            return Err(OrchestratorError::InvalidRequest(format!(
                "job {job_id} already exists"
            )));
        }
        let mut tq_ids = BTreeSet::new();
        for tq in &req.tq_pool {
            if !tq_ids.insert(&tq.tq_id) {
                return Err(OrchestratorError::InvalidRequest(format!(
                    "duplicate test question {}",
                    tq.tq_id
                )));
            }
        }
        let mut units = Vec::new();
        for sid in &req.sessions {
            let input = g
                .state
                .sessions
                .get(sid)
                .ok_or_else(|| OrchestratorError::UnknownSession(sid.clone()))?;
            let bundle = g.state.bundles.get(sid).ok_or_else(|| {
                OrchestratorError::InvalidRequest(format!("session {sid} is not pre-tagged"))
            })?;
            if !locale_matches(&bundle.routing, &req.locale) {
                return Err(OrchestratorError::InvalidRequest(format!(
                    "session {sid} does not match locale {}",
                    req.locale
                )));
            }
            for (i, d) in bundle.drafts.iter().enumerate() {
                let assisted = bundle.prelabel_mode == PrelabelMode::Assisted;
                units.push(WorkUnit {
                    unit_id: format!("{sid}-u{i:03}"),
                    job_id: job_id.clone(),
                    session_id: sid.clone(),
                    payload: WorkItemPayload {
                        kind: AnswerKind::Transcription,
                        audio_path: format!("{}#t={:.3},{:.3}", input.audio_path, d.start, d.end),
                        duration_seconds: d.duration(),
                        prelabel: assisted.then(|| d.transcript.clone()),
                    },
                    draft: Some(d.clone()),
                    prelabel_mode: bundle.prelabel_mode,
                    state: UnitState::Queued,
                    lease: None,
                    accepted: None,
                    history: Vec::new(),
                });
            }
        }
        for spec in &req.units {
            if let Some(l) = &spec.locale {
                if !l.eq_ignore_ascii_case(&req.locale) {
                    return Err(OrchestratorError::InvalidRequest(format!(
                        "unit {} has locale {l}, job has {}",
                        spec.unit_id, req.locale
                    )));
                }
            }
            let mode = spec
                .prelabel_mode
                .unwrap_or(if spec.payload.prelabel.is_some() {
                    PrelabelMode::Assisted
                } else {
                    PrelabelMode::FromScratch
                });
            units.push(WorkUnit {
                unit_id: spec.unit_id.clone(),
                job_id: job_id.clone(),
                session_id: spec.session_id.clone(),
                payload: spec.payload.clone(),
                draft: None,
                prelabel_mode: mode,
                state: UnitState::Queued,
                lease: None,
                accepted: None,
                history: Vec::new(),
            });
        }
        let mut seen = BTreeSet::new();
        for u in &units {
            if !seen.insert(u.unit_id.as_str()) || g.state.units.contains_key(&u.unit_id) {
                return Err(OrchestratorError::InvalidRequest(format!(
                    "duplicate unit {}",
                    u.unit_id
                )));
            }
        }
        let job = Job {
            job_id: job_id.clone(),
            locale: req.locale,
            guideline_version: req.guideline_version,
            policy: req.policy,
            tq_pool: req.tq_pool,
            unit_ids: units.iter().map(|u| u.unit_id.clone()).collect(),
            created_at: now,
            roster: BTreeSet::new(),
            behavior: BTreeMap::new(),
            flags: BTreeMap::new(),
            qa_rounds: Vec::new(),
            finalized: false,
        };
        g.commit(vec![Event::JobCreated {
            job: Box::new(job),
            units,
        }])?;
        Ok(job_id)
    }

    /// Leases queued units plus hidden test questions to an annotator. An
    /// annotator holding a live lease in the job gets the same assignment
    /// back.
    pub fn next_assignment(&self, annotator_id: &str, job_id: &str) -> Result<Assignment> {
        let mut g = self.lock()?;
        let now = g.clock.now_ms();
        g.expire(now)?;
        let seed = g.config.seed;
        let st = &g.state;
        let job = st
            .jobs
            .get(job_id)
            .ok_or_else(|| OrchestratorError::UnknownJob(job_id.to_string()))?;
        let profile = st
            .annotators
            .get(annotator_id)
            .ok_or_else(|| OrchestratorError::UnknownAnnotator(annotator_id.to_string()))?;
        if !profile.is_active() {
            return Err(OrchestratorError::AnnotatorRemoved(
                annotator_id.to_string(),
            ));
        }
        if !profile.qualified || !profile.locale.eq_ignore_ascii_case(&job.locale) {
            return Err(OrchestratorError::NotQualified {
                annotator_id: annotator_id.to_string(),
                locale: job.locale.clone(),
            });
        }
        if let Some(rec) = st.live_lease(job_id, annotator_id) {
            return Ok(rec.assignment.clone());
        }
        if job.finalized {
            return Err(OrchestratorError::NoWork(job_id.to_string()));
        }
        let answered: BTreeSet<&str> = st
            .answers
            .iter()
            .filter(|a| a.annotator_id == annotator_id)
            .map(|a| a.unit_id.as_str())
            .collect();
        let queued: Vec<&WorkUnit> = st
            .units_of(job)
            .filter(|u| u.state == UnitState::Queued)
            .collect();
        let (fresh, seen): (Vec<&WorkUnit>, Vec<&WorkUnit>) = queued
            .into_iter()
            .partition(|u| !answered.contains(u.unit_id.as_str()));
        let picked: Vec<(String, WorkItemPayload)> = fresh
            .into_iter()
            .chain(seen)
            .take(job.policy.assignment_size)
            .map(|u| {
                let mut payload = u.payload.clone();
                if !job.policy.keep_prelabels_on_recycle && u.was_recycled() {
                    payload.prelabel = None;
                }
                (u.unit_id.clone(), payload)
            })
            .collect();
        if picked.is_empty() {
            return Err(OrchestratorError::NoWork(job_id.to_string()));
        }
        let n = st.counters.assignments + 1;
        let assignment_id = format!("{job_id}-a{n:06}");
        let empty = BTreeSet::new();
        let used = st.used_tqs.get(annotator_id).unwrap_or(&empty);
        let mut assignment = build_assignment(
            &assignment_id,
            annotator_id,
            &picked,
            &job.tq_pool,
            job.policy.tq_per_assignment,
            used,
            mix(seed ^ mix(n)),
        )?;
        assignment.lease_expiry = now + job.policy.lease_minutes * 60_000;
        let tq_ids: Vec<String> = assignment
            .items
            .iter()
            .filter_map(|i| match &i.item {
                ItemRef::TestQuestion(t) => Some(t.clone()),
                ItemRef::Unit(_) => None,
            })
            .collect();
        let mut events = vec![Event::AssignmentLeased {
            job_id: job_id.to_string(),
            assignment: Box::new(assignment.clone()),
            at: now,
        }];
        if !tq_ids.is_empty() {
            events.push(Event::TqsUsed {
                annotator_id: annotator_id.to_string(),
                tq_ids,
            });
        }
        for (unit_id, _) in &picked {
            events.push(transition(
                unit_id,
                UnitState::Leased,
                annotator_id,
                now,
                Some(assignment_id.clone()),
            ));
        }
        g.commit(events)?;
        Ok(assignment)
    }

    /// Behavior events sent ahead of the submission. Later events for a
    /// slot replace earlier ones.
    pub fn record_events(&self, assignment_id: &str, events: Vec<BehaviorEvent>) -> Result<usize> {
        let mut g = self.lock()?;
        let now = g.clock.now_ms();
        g.expire(now)?;
        let rec = g
            .state
            .assignments
            .get(assignment_id)
            .ok_or_else(|| OrchestratorError::UnknownAssignment(assignment_id.to_string()))?;
        match rec.status {
            AssignmentStatus::Expired => {
                return Err(OrchestratorError::LeaseExpired(assignment_id.to_string()))
            }
            AssignmentStatus::Submitted => return Ok(0),
            AssignmentStatus::Leased => {}
        }
        let slots = rec.assignment.items.len();
        let events: Vec<BehaviorEvent> = normalize_events(rec, events)?;
        if let Some(bad) = events.iter().find(|e| e.slot_index >= slots) {
            return Err(OrchestratorError::InvalidRequest(format!(
                "no slot {}",
                bad.slot_index
            )));
        }
        let n = events.len();
        g.commit(vec![Event::BehaviorStored {
            assignment_id: assignment_id.to_string(),
            events,
        }])?;
        Ok(n)
    }

    /// Judges, validates and settles one assignment. Repeating a submission
    /// returns the stored outcome without touching state.
    pub fn submit(&self, assignment_id: &str, req: SubmitRequest) -> Result<SubmissionOutcome> {
        let mut g = self.lock()?;
        let now = g.clock.now_ms();
        g.expire(now)?;
        let rec = g
            .state
            .assignments
            .get(assignment_id)
            .ok_or_else(|| OrchestratorError::UnknownAssignment(assignment_id.to_string()))?;
        if let Some(caller) = &req.annotator_id {
            if *caller != rec.assignment.annotator_id {
                return Err(OrchestratorError::Forbidden(format!(
                    "assignment {assignment_id} belongs to another annotator"
                )));
            }
        }
        if let Some(out) = &rec.outcome {
            return Ok(out.clone());
        }
        if rec.status == AssignmentStatus::Expired {
            return Err(OrchestratorError::LeaseExpired(assignment_id.to_string()));
        }
        let job_id = rec.job_id.clone();
        g.rules_for(&job_id)?;
        let inner = &mut *g;
        let (events, outcome) =
            settle(&inner.state, &inner.rules[&job_id], assignment_id, req, now)?;
        inner.commit(events)?;
        Ok(outcome)
    }

    /// Returns expired leases' units to the queue.
    pub fn expire_leases(&self) -> Result<Vec<String>> {
        let mut g = self.lock()?;
        let now = g.clock.now_ms();
        g.expire(now)
    }

    pub fn job_status(&self, job_id: &str) -> Result<JobStatus> {
        let g = self.lock()?;
        let now = g.clock.now_ms();
        let st = &g.state;
        let job = st
            .jobs
            .get(job_id)
            .ok_or_else(|| OrchestratorError::UnknownJob(job_id.to_string()))?;
        let mut units_by_state: BTreeMap<String, usize> = UnitState::ALL
            .iter()
            .map(|s| (s.as_str().to_string(), 0))
            .collect();
        for u in st.units_of(job) {
            *units_by_state
                .entry(u.state.as_str().to_string())
                .or_default() += 1;
        }
        let live_leases = st
            .assignments
            .values()
            .filter(|r| {
                r.job_id == job_id
                    && r.status == AssignmentStatus::Leased
                    && r.assignment.lease_expiry > now
            })
            .count();
        let roster = job
            .roster
            .iter()
            .filter_map(|a| st.annotators.get(a))
            .map(|p| AnnotatorSummary {
                annotator_id: p.annotator_id.clone(),
                status: p.status,
                quality_score: p.quality_score,
                tq_attempted: p.tq_attempted,
                behavior_flags: p.behavior_flags.clone(),
            })
            .collect();
        Ok(JobStatus {
            job_id: job_id.to_string(),
            locale: job.locale.clone(),
            guideline_version: job.guideline_version.clone(),
            total_units: job.unit_ids.len(),
            units_by_state,
            live_leases,
            roster,
            qa_rounds: job.qa_rounds.clone(),
            finalized: job.finalized,
        })
    }

    /// Unit ids the next QA round of a job will audit.
    pub fn audit_sample(&self, job_id: &str) -> Result<Vec<String>> {
        let g = self.lock()?;
        let (_, sample, _) = qa_sample(&g.state, g.config.seed, job_id)?;
        Ok(sample)
    }

    /// Runs one acceptance-sampling round. On Accept the job is finalized;
    /// on Rework the failed units plus enough others to cover the observed
    /// defect share go back to the queue, and annotation continues until the
    /// next call.
    pub fn finalize_job(&self, job_id: &str, auditor: &mut dyn Auditor) -> Result<QaReport> {
        let mut g = self.lock()?;
        let now = g.clock.now_ms();
        g.expire(now)?;
        let seed = g.config.seed;
        let st = &g.state;
        let job = st
            .jobs
            .get(job_id)
            .ok_or_else(|| OrchestratorError::UnknownJob(job_id.to_string()))?;
        if job.finalized {
            if let Some(last) = job.qa_rounds.last() {
                return Ok(last.clone());
            }
        }
        let (plan, sample, census) = qa_sample(st, seed, job_id)?;
        let mut results = Vec::with_capacity(sample.len());
        let mut missing = false;
        for id in &sample {
            let unit = &st.units[id];
            let answer = unit
                .accepted
                .as_ref()
                .map(|a| a.text.as_str())
                .unwrap_or("");
            match auditor.audit(unit, answer) {
                Some(v) => results.push(v),
                None => missing = true,
            }
        }
        if missing {
            return Err(OrchestratorError::AuditRequired {
                job_id: job_id.to_string(),
                sample_ids: sample,
            });
        }
        let assessment = if census {
            assess_census(&results, job.policy.acceptance_threshold)?
        } else {
            assess_delivery(&results, job.policy.acceptance_threshold)?
        };
        let failed: Vec<String> = sample
            .iter()
            .zip(&results)
            .filter(|(_, ok)| !**ok)
            .map(|(id, _)| id.clone())
            .collect();
        let round = job.qa_rounds.len() as u32 + 1;
        let mut events = Vec::new();
        let requeued = match assessment.verdict {
            QaVerdict::Accept => Vec::new(),
            QaVerdict::Rework { fraction } => {
                let n = job.unit_ids.len();
                let want = ((fraction * n as f64 - 1e-9).ceil() as usize)
                    .max(failed.len())
                    .min(n);
                let failed_set: BTreeSet<&String> = failed.iter().collect();
                let mut rest: Vec<&String> = job
                    .unit_ids
                    .iter()
                    .filter(|u| !failed_set.contains(u))
                    .collect();
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix(seed ^ fnv(job_id) ^ mix(round as u64 + 1000)));
                rest.shuffle(&mut rng);
                let mut ids: Vec<String> = failed.clone();
                ids.extend(rest.into_iter().take(want - failed.len()).cloned());
                ids.sort();
                ids
            }
        };
        let report = QaReport {
            job_id: job_id.to_string(),
            round,
            plan,
            sample_ids: sample,
            failed_ids: failed,
            census,
            assessment,
            requeued_ids: requeued.clone(),
            at: now,
        };
        events.push(Event::QaRoundRecorded {
            job_id: job_id.to_string(),
            report: Box::new(report.clone()),
        });
        if report.accepted() {
            for id in &job.unit_ids {
                events.push(transition(id, UnitState::Final, "qa", now, None));
            }
            events.push(Event::JobFinalized {
                job_id: job_id.to_string(),
                at: now,
            });
        } else {
            for id in &requeued {
                requeue(id, "qa", now, &mut events);
            }
        }
        g.commit(events)?;
        if let Some(root) = g.store.root() {
            let dir = root.join(REPORTS_DIR);
            fs::create_dir_all(&dir)?;
            fs::write(
                dir.join(format!("{job_id}-round{round:02}.json")),
                serde_json::to_vec_pretty(&report)?,
            )?;
        }
        Ok(report)
    }

    /// Accepted transcripts of a job, by unit id.
    pub fn transcripts(&self, job_id: &str) -> Result<BTreeMap<String, String>> {
        let g = self.lock()?;
        let job = g
            .state
            .jobs
            .get(job_id)
            .ok_or_else(|| OrchestratorError::UnknownJob(job_id.to_string()))?;
        Ok(g.state
            .units_of(job)
            .filter_map(|u| {
                u.accepted
                    .as_ref()
                    .map(|a| (u.unit_id.clone(), a.text.clone()))
            })
            .collect())
    }

    /// Selects and (given an output directory) emits a dataset package.
    pub fn package(&self, req: PackageRequest) -> Result<PackageResponse> {
        let (root, seed) = {
            let g = self.lock()?;
            (g.store.root().map(Path::to_path_buf), g.config.seed)
        };
        let corpus_dir = match (&req.corpus, &root) {
            (Some(c), _) => c.clone(),
            (None, Some(r)) => r.join("corpus"),
            (None, None) => {
                return Err(OrchestratorError::InvalidRequest(
                    "no corpus directory given".into(),
                ))
            }
        };
        let corpus = load_corpus(&corpus_dir)?;
        let result = select_subset(
            &corpus,
            &req.spec,
            &PackagingOptions::default(),
            req.seed.unwrap_or(seed),
        )?;
        let out = match (&req.out, &root) {
            (Some(o), _) => Some(o.clone()),
            (None, Some(r)) => Some(r.join("packages").join(req.spec.name.render()?)),
            (None, None) => None,
        };
        let manifest = match &out {
            Some(dir) => Some(emit_dataset(
                &result,
                &corpus,
                &req.spec.name,
                dir,
                req.force,
            )?),
            None => None,
        };
        Ok(PackageResponse {
            result,
            manifest,
            out,
        })
    }
}

/// Clamps client-reported events to what the server knows about each slot.
fn normalize_events(
    rec: &AssignmentRecord,
    events: Vec<BehaviorEvent>,
) -> Result<Vec<BehaviorEvent>> {
    let a = &rec.assignment;
    events
        .into_iter()
        .map(|mut e| {
            let item = a.items.get(e.slot_index).ok_or_else(|| {
                OrchestratorError::InvalidRequest(format!("no slot {}", e.slot_index))
            })?;
            e.assignment_id = a.assignment_id.clone();
            e.mode = if item.payload.prelabel.is_some() {
                PrelabelMode::Assisted
            } else {
                PrelabelMode::FromScratch
            };
            if e.audio_seconds <= 0.0 {
                e.audio_seconds = item.payload.duration_seconds;
            }
            Ok(e)
        })
        .collect()
}

fn qa_sample(
    st: &State,
    seed: u64,
    job_id: &str,
) -> Result<(crate::qc::SamplingPlan, Vec<String>, bool)> {
    let job = st
        .jobs
        .get(job_id)
        .ok_or_else(|| OrchestratorError::UnknownJob(job_id.to_string()))?;
    let pending = st
        .units_of(job)
        .filter(|u| u.state != UnitState::Accepted)
        .count();
    if job.unit_ids.is_empty() || (pending > 0 && !job.finalized) {
        return Err(OrchestratorError::JobIncomplete {
            job_id: job_id.to_string(),
            pending,
        });
    }
    let p = &job.policy;
    let plan = plan_sample(
        Some(job.unit_ids.len() as u64),
        p.sampling_confidence,
        p.sampling_margin,
        p.assumed_proportion,
    )?;
    if !sample_can_accept(plan.sample_size, p.acceptance_threshold) {
        let mut all = job.unit_ids.clone();
        all.sort();
        return Ok((plan, all, true));
    }
    let round = job.qa_rounds.len() as u64 + 1;
    let sample = draw_sample(&job.unit_ids, &plan, mix(seed ^ fnv(job_id) ^ mix(round)));
    Ok((plan, sample, false))
}

/// Computes the events of one submission.
fn settle(
    st: &State,
    rules: &RuleSet,
    assignment_id: &str,
    req: SubmitRequest,
    now: u64,
) -> Result<(Vec<Event>, SubmissionOutcome)> {
    let rec = &st.assignments[assignment_id];
    let job = &st.jobs[&rec.job_id];
    let a = &rec.assignment;
    let annotator = a.annotator_id.as_str();
    let profile = st
        .annotators
        .get(annotator)
        .ok_or_else(|| OrchestratorError::UnknownAnnotator(annotator.to_string()))?;

    let mut events_all: BTreeMap<usize, BehaviorEvent> = rec
        .pending_events
        .iter()
        .map(|e| (e.slot_index, e.clone()))
        .collect();
    for e in normalize_events(rec, req.events)? {
        events_all.insert(e.slot_index, e);
    }
    let events_all: Vec<BehaviorEvent> = events_all.into_values().collect();
    let own: BTreeMap<String, Vec<BehaviorEvent>> =
        [(annotator.to_string(), events_all.clone())].into();
    let unheard: BTreeSet<usize> = monitor_behavior(&own, &job.policy.behavior)
        .into_iter()
        .filter(|f| f.kind == FlagKind::ListenIncomplete)
        .filter_map(|f| f.slot_index)
        .collect();

    let answers: HashMap<&str, &str> = req
        .answers
        .iter()
        .map(|s| (s.token.as_str(), s.text.as_str()))
        .collect();
    let judge = job.policy.judge();
    let mut judgments = Vec::new();
    let mut rejected = Vec::new();
    let mut candidates: Vec<(&str, &str)> = Vec::new();
    for item in &a.items {
        let text = answers.get(item.token.as_str()).copied().unwrap_or("");
        let mut reasons: Vec<String> = validate_realtime(text, rules)
            .into_iter()
            .filter(|v| v.hard)
            .map(|v| format!("{}: {}", v.rule_id, v.message))
            .collect();
        if unheard.contains(&item.slot_index) {
            reasons.push(FlagKind::ListenIncomplete.as_str().to_string());
        }
        let unit_id = match &item.item {
            ItemRef::TestQuestion(tq_id) => {
                let tq = job
                    .tq_pool
                    .iter()
                    .find(|t| &t.tq_id == tq_id)
                    .ok_or_else(|| {
                        OrchestratorError::Corrupt(format!("test question {tq_id} not in job pool"))
                    })?;
                judgments.push(judge_answer(
                    tq.payload.kind,
                    text,
                    &tq.ground_truth,
                    &judge,
                ));
                None
            }
            ItemRef::Unit(u) => {
                if reasons.is_empty() {
                    candidates.push((u.as_str(), text));
                }
                Some(u.clone())
            }
        };
        if !reasons.is_empty() {
            rejected.push(SlotReject {
                slot_index: item.slot_index,
                unit_id,
                reasons,
            });
        }
    }

    let (next, actions) = update_score_and_enforce(profile, &judgments, &job.policy.removal());
    let removed_now = actions
        .iter()
        .any(|x| matches!(x, QcAction::RemoveAnnotator { .. }));
    let removed = !next.is_active();
    let mut events = Vec::new();
    for u in a.unit_ids() {
        events.push(transition(u, UnitState::Submitted, annotator, now, None));
    }
    let mut accepted_units = Vec::new();
    let mut recycled_units = Vec::new();
    let mut seq = st.counters.answers;
    if removed {
        for u in a.unit_ids() {
            requeue(u, "qc", now, &mut events);
            recycled_units.push(u.to_string());
        }
    } else {
        for r in &rejected {
            if let Some(u) = &r.unit_id {
                requeue(u, "validation", now, &mut events);
            }
        }
        for (u, text) in candidates {
            seq += 1;
            events.push(transition(u, UnitState::Accepted, annotator, now, None));
            events.push(Event::AnswerAccepted {
                record: AnswerRecord {
                    unit_id: u.to_string(),
                    annotator_id: annotator.to_string(),
                    text: text.to_string(),
                    seq,
                    at: now,
                },
            });
            accepted_units.push(u.to_string());
        }
    }
    if removed_now {
        let history: Vec<AcceptedAnswer> = st
            .answers
            .iter()
            .map(|r| AcceptedAnswer {
                unit_id: r.unit_id.clone(),
                annotator_id: r.annotator_id.clone(),
                seq: r.seq,
            })
            .collect();
        let active =
            |id: &str| id != annotator && st.annotators.get(id).is_some_and(|p| p.is_active());
        for u in recycle_units(annotator, &history, active) {
            if st
                .units
                .get(&u)
                .is_some_and(|w| w.state == UnitState::Accepted)
            {
                requeue(&u, "qc", now, &mut events);
                recycled_units.push(u);
            }
        }
    }
    if next != *profile {
        events.push(Event::ProfileUpdated {
            profile: next.clone(),
        });
    }
    let submission_id = req
        .submission_id
        .unwrap_or_else(|| assignment_id.to_string());
    let outcome = SubmissionOutcome {
        assignment_id: assignment_id.to_string(),
        submission_id,
        annotator_id: annotator.to_string(),
        accepted_units,
        rejected,
        recycled_units,
        tq_judged: judgments.len() as u64,
        tq_correct: judgments.iter().filter(|&&j| j).count() as u64,
        quality_score: next.quality_score,
        removed,
    };

    // Population flags over the whole job, this submission included.
    let mut population = job.behavior.clone();
    population
        .entry(annotator.to_string())
        .or_default()
        .extend(events_all.iter().cloned());
    let mut flags: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for f in monitor_behavior(&population, &job.policy.behavior) {
        *flags
            .entry(f.annotator_id.clone())
            .or_default()
            .entry(f.kind.as_str().to_string())
            .or_default() += 1;
    }
    events.push(Event::AssignmentSubmitted {
        assignment_id: assignment_id.to_string(),
        outcome: Box::new(outcome.clone()),
        events: events_all,
    });
    if flags != job.flags {
        events.push(Event::FlagsUpdated {
            job_id: job.job_id.clone(),
            flags,
        });
    }
    Ok((events, outcome))
}
