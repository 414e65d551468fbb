//! JSON-over-HTTP surface of the service. Handlers run the blocking service
//! calls on the blocking pool.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::audit::{Chain, QaReport, ReferenceAuditor, VerdictAuditor};
use super::service::{
    IngestReceipt, JobRequest, JobStatus, Orchestrator, PackageRequest, PackageResponse,
    SubmissionReceipt, SubmitRequest,
};
use super::OrchestratorError;
use crate::pretag::RawSessionInput;
use crate::qc::{
    compile_rules, validate_realtime, AnnotatorProfile, AnnotatorView, BehaviorEvent, JudgePolicy,
    RuleViolation, ValidationRule,
};

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

pub struct ApiError(pub OrchestratorError);

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use OrchestratorError as E;
        let status = match &self.0 {
            E::UnknownAnnotator(_)
            | E::UnknownJob(_)
            | E::UnknownSession(_)
            | E::UnknownAssignment(_) => StatusCode::NOT_FOUND,
            E::AnnotatorRemoved(_) | E::NotQualified { .. } | E::Forbidden(_) => {
                StatusCode::FORBIDDEN
            }
            E::LeaseExpired(_) => StatusCode::GONE,
            E::NoWork(_) | E::JobIncomplete { .. } | E::AuditRequired { .. } => {
                StatusCode::CONFLICT
            }
            E::InvalidRequest(_) | E::Qc(_) | E::Packaging(_) | E::Corpus(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            E::Crashed => StatusCode::SERVICE_UNAVAILABLE,
            E::Io(_) | E::Json(_) | E::Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.0.code(), "message": self.0.to_string() });
        if let E::AuditRequired { sample_ids, .. } = &self.0 {
            body["sample_ids"] = json!(sample_ids);
        }
        (status, Json(body)).into_response()
    }
}

/// JSON request body whose rejections use the API error shape.
struct Body<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e| ApiError(OrchestratorError::InvalidRequest(e.body_text())))
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = Arc<Orchestrator>;

async fn blocking<T: Send + 'static>(
    orch: Shared,
    f: impl FnOnce(&Orchestrator) -> Result<T, OrchestratorError> + Send + 'static,
) -> ApiResult<T> {
    match tokio::task::spawn_blocking(move || f(&orch)).await {
        Ok(r) => r.map(Json).map_err(ApiError),
        Err(e) => Err(ApiError(OrchestratorError::Corrupt(format!(
            "worker panicked: {e}"
        )))),
    }
}

fn caller(headers: &HeaderMap) -> Option<String> {
    headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

#[derive(Debug, Deserialize)]
struct QualificationBody {
    locale: String,
    #[serde(default = "yes")]
    qualified: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
struct Created {
    job_id: String,
}

/// Audit input for `POST /jobs/{id}/finalize`: explicit verdicts win, then
/// reference transcripts judged with the job's WER tolerance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FinalizeBody {
    #[serde(default)]
    pub verdicts: BTreeMap<String, bool>,
    #[serde(default)]
    pub references: BTreeMap<String, String>,
}

impl FinalizeBody {
    pub fn auditor(self, wer_tolerance: f64) -> Chain<VerdictAuditor, ReferenceAuditor> {
        Chain(
            VerdictAuditor(self.verdicts),
            ReferenceAuditor {
                references: self.references,
                policy: JudgePolicy { wer_tolerance },
            },
        )
    }
}

#[derive(Debug, Deserialize)]
struct ValidateBody {
    text: String,
}

async fn ingest(
    State(o): State<Shared>,
    Body(batch): Body<Vec<RawSessionInput>>,
) -> ApiResult<IngestReceipt> {
    blocking(o, move |o| o.ingest(batch)).await
}

async fn qualify(
    State(o): State<Shared>,
    Path(id): Path<String>,
    Body(body): Body<QualificationBody>,
) -> ApiResult<AnnotatorProfile> {
    blocking(o, move |o| {
        o.set_qualification(&id, &body.locale, body.qualified)
    })
    .await
}

async fn create_job(
    State(o): State<Shared>,
    Body(req): Body<JobRequest>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(job_id) = blocking(o, move |o| o.create_job(req)).await?;
    Ok((StatusCode::CREATED, Json(Created { job_id })))
}

async fn next_assignment(
    State(o): State<Shared>,
    Path(job_id): Path<String>,
    Query(q): Query<NextQuery>,
    headers: HeaderMap,
) -> ApiResult<AnnotatorView> {
    let annotator = q.annotator.or_else(|| caller(&headers)).ok_or_else(|| {
        ApiError(OrchestratorError::InvalidRequest(
            "annotator query parameter or header required".into(),
        ))
    })?;
    blocking(o, move |o| {
        o.next_assignment(&annotator, &job_id)
            .map(|a| a.annotator_view())
    })
    .await
}

async fn submit(
    State(o): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(mut req): Body<SubmitRequest>,
) -> ApiResult<SubmissionReceipt> {
    req.annotator_id = caller(&headers);
    blocking(o, move |o| o.submit(&id, req).map(|out| out.receipt())).await
}

async fn events(
    State(o): State<Shared>,
    Path(id): Path<String>,
    Body(events): Body<Vec<BehaviorEvent>>,
) -> ApiResult<serde_json::Value> {
    blocking(o, move |o| {
        o.record_events(&id, events).map(|n| json!({ "stored": n }))
    })
    .await
}

async fn status(State(o): State<Shared>, Path(id): Path<String>) -> ApiResult<JobStatus> {
    blocking(o, move |o| o.job_status(&id)).await
}

async fn rules(State(o): State<Shared>, Path(id): Path<String>) -> ApiResult<Vec<ValidationRule>> {
    blocking(o, move |o| {
        o.read(|st| st.jobs.get(&id).map(|j| j.policy.rules.clone()))
            .ok_or(OrchestratorError::UnknownJob(id))
    })
    .await
}

async fn validate(
    State(o): State<Shared>,
    Path(id): Path<String>,
    Body(body): Body<ValidateBody>,
) -> ApiResult<Vec<RuleViolation>> {
    blocking(o, move |o| {
        let rules = o
            .read(|st| st.jobs.get(&id).map(|j| j.policy.rules.clone()))
            .ok_or(OrchestratorError::UnknownJob(id))?;
        Ok(validate_realtime(&body.text, &compile_rules(&rules)?))
    })
    .await
}

async fn finalize(
    State(o): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<QaReport> {
    // An empty body means no audit input.
    let body: FinalizeBody = if body.iter().all(u8::is_ascii_whitespace) {
        FinalizeBody::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError(OrchestratorError::InvalidRequest(e.to_string())))?
    };
    blocking(o, move |o| {
        let wer_tolerance = o
            .read(|st| st.jobs.get(&id).map(|j| j.policy.wer_tolerance))
            .ok_or_else(|| OrchestratorError::UnknownJob(id.clone()))?;
        o.finalize_job(&id, &mut body.auditor(wer_tolerance))
    })
    .await
}

async fn package(
    State(o): State<Shared>,
    Body(req): Body<PackageRequest>,
) -> ApiResult<PackageResponse> {
    blocking(o, move |o| o.package(req)).await
}

pub fn router(orch: Arc<Orchestrator>) -> Router {
    Router::new()
        .route("/sessions", post(ingest))
        .route("/annotators/{id}/qualification", post(qualify))
        .route("/jobs", post(create_job))
        .route("/jobs/{id}/next-assignment", get(next_assignment))
        .route("/jobs/{id}/status", get(status))
        .route("/jobs/{id}/rules", get(rules))
        .route("/jobs/{id}/validate", post(validate))
        .route("/jobs/{id}/finalize", post(finalize))
        .route("/assignments/{id}/submit", post(submit))
        .route("/assignments/{id}/events", post(events))
        .route("/packages", post(package))
        .with_state(orch)
}

/// Serves the API on an already bound listener until the task is dropped.
pub async fn serve(
    listener: tokio::net::TcpListener,
    orch: Arc<Orchestrator>,
) -> std::io::Result<()> {
    axum::serve(listener, router(orch)).await
}
