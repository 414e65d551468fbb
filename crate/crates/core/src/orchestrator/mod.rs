//! Job and assignment service.
//!
//! All state lives in [`State`] and changes only by folding [`Event`]s. Every
//! command computes its events against the current state, appends them to
//! the log as one batch, then applies them, so a log replay always lands on
//! the live state. A single mutex is the one logical writer.

mod audit;
mod clock;
mod http;
mod service;
mod state;
mod store;

use thiserror::Error;

pub use audit::{Auditor, Chain, QaReport, ReferenceAuditor, VerdictAuditor};
pub use clock::{Clock, ManualClock, SystemClock};
pub use http::{router, serve, ApiError, FinalizeBody};
pub use service::{
    AnnotatorSummary, IngestReceipt, JobRequest, JobStatus, Orchestrator, PackageRequest,
    PackageResponse, PretagSummary, ServiceConfig, SlotAnswer, SubmissionReceipt, SubmitRequest,
    UnitSpec,
};
pub use state::{
    AnswerRecord, AssignmentRecord, AssignmentStatus, Counters, Event, Job, ParkedSession,
    SlotReject, State, SubmissionOutcome, Transition, UnitState, WorkUnit,
};
pub use store::{
    replay, Appended, CrashMode, CrashPlan, EventStore, LogRecord, Snapshot, EVENTS_FILE,
    REPORTS_DIR, SNAPSHOT_FILE,
};

use crate::corpus::CorpusError;
use crate::packaging::PackagingError;
use crate::qc::QcError;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("no queued work in job {0}")]
    NoWork(String),
    #[error("annotator {0} has been removed")]
    AnnotatorRemoved(String),
    #[error("annotator {annotator_id} is not qualified for {locale}")]
    NotQualified {
        annotator_id: String,
        locale: String,
    },
    #[error("unknown annotator {0}")]
    UnknownAnnotator(String),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown assignment {0}")]
    UnknownAssignment(String),
    #[error("lease on assignment {0} has expired")]
    LeaseExpired(String),
    #[error("job {job_id} has {pending} units not yet accepted")]
    JobIncomplete { job_id: String, pending: usize },
    #[error("audit verdicts needed for {} sampled units of job {job_id}", sample_ids.len())]
    AuditRequired {
        job_id: String,
        sample_ids: Vec<String>,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error(transparent)]
    Qc(#[from] QcError),
    #[error(transparent)]
    Packaging(#[from] PackagingError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("store encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corrupt event log: {0}")]
    Corrupt(String),
    #[error("service is down after an injected crash")]
    Crashed,
}

impl OrchestratorError {
    /// Stable machine-readable code used by the HTTP API and the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            OrchestratorError::NoWork(_) => "NO_WORK",
            OrchestratorError::AnnotatorRemoved(_) => "ANNOTATOR_REMOVED",
            OrchestratorError::NotQualified { .. } => "NOT_QUALIFIED",
            OrchestratorError::UnknownAnnotator(_) => "UNKNOWN_ANNOTATOR",
            OrchestratorError::UnknownJob(_) => "UNKNOWN_JOB",
            OrchestratorError::UnknownSession(_) => "UNKNOWN_SESSION",
            OrchestratorError::UnknownAssignment(_) => "UNKNOWN_ASSIGNMENT",
            OrchestratorError::LeaseExpired(_) => "LEASE_EXPIRED",
            OrchestratorError::JobIncomplete { .. } => "JOB_INCOMPLETE",
            OrchestratorError::AuditRequired { .. } => "AUDIT_REQUIRED",
            OrchestratorError::InvalidRequest(_) => "INVALID_REQUEST",
            OrchestratorError::Forbidden(_) => "FORBIDDEN",
            OrchestratorError::Qc(QcError::TqPoolExhausted(_)) => "TQ_POOL_EXHAUSTED",
            OrchestratorError::Qc(_) => "QC_ERROR",
            OrchestratorError::Packaging(PackagingError::Infeasible) => "INFEASIBLE",
            OrchestratorError::Packaging(_) => "PACKAGING_ERROR",
            OrchestratorError::Corpus(_) => "CORPUS_ERROR",
            OrchestratorError::Io(_) | OrchestratorError::Json(_) => "STORE_ERROR",
            OrchestratorError::Corrupt(_) => "CORRUPT_LOG",
            OrchestratorError::Crashed => "CRASHED",
        }
    }
}
