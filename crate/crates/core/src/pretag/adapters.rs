//! Stage adapters: the contract every machine-labeling model sits behind.
//!
//! Two families ship here. [`FixtureStore`] answers from sidecar files named
//! `{session_id}.pretag.json`; [`ExternalAdapter`] forwards a JSON request
//! `{stage, session_id, audio_path, regions}` to an HTTP endpoint and expects a
//! [`StageResult`] back. A 404 from the endpoint means "not applicable".

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Stage, StageResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRequest {
    pub stage: Stage,
    pub session_id: String,
    pub audio_path: String,
    /// Time regions to process, in seconds. Only ASR receives regions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<(f64, f64)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    /// The adapter has nothing to say for this session (optional stages).
    #[error("stage not applicable")]
    NotApplicable,
    #[error("{0}")]
    Failed(String),
}

pub trait StageAdapter: Send + Sync {
    fn name(&self) -> &str;

    fn run(&self, request: &StageRequest) -> Result<StageResult, AdapterError>;

    /// Adapters that cannot serve concurrent calls return true; the pipeline
    /// then serializes calls to them.
    fn single_flight(&self) -> bool {
        false
    }
}

struct SingleFlight {
    inner: Arc<dyn StageAdapter>,
    lock: Mutex<()>,
}

impl StageAdapter for SingleFlight {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn run(&self, request: &StageRequest) -> Result<StageResult, AdapterError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        self.inner.run(request)
    }
}

/// Shared record of `(stage, session_id)` adapter invocations.
#[derive(Debug, Clone, Default)]
pub struct CallLog(Arc<Mutex<Vec<(Stage, String)>>>);

impl CallLog {
    pub fn calls(&self) -> Vec<(Stage, String)> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn record(&self, stage: Stage, session: &str) {
        self.0
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push((stage, session.to_string()));
    }
}

struct Logged {
    inner: Arc<dyn StageAdapter>,
    log: CallLog,
}

impl StageAdapter for Logged {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn run(&self, request: &StageRequest) -> Result<StageResult, AdapterError> {
        self.log.record(request.stage, &request.session_id);
        self.inner.run(request)
    }

    fn single_flight(&self) -> bool {
        self.inner.single_flight()
    }
}

/// Adapters keyed by the stage they serve.
#[derive(Clone, Default)]
pub struct AdapterSet {
    adapters: BTreeMap<Stage, Arc<dyn StageAdapter>>,
}

impl AdapterSet {
    pub const MANDATORY: [Stage; 5] = [
        Stage::SyntheticDetection,
        Stage::LanguageID,
        Stage::SpeechSegmentation,
        Stage::SpeakerSegmentation,
        Stage::ASR,
    ];

    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, stage: Stage, adapter: Arc<dyn StageAdapter>) -> &mut Self {
        let adapter: Arc<dyn StageAdapter> = if adapter.single_flight() {
            Arc::new(SingleFlight {
                inner: adapter,
                lock: Mutex::new(()),
            })
        } else {
            adapter
        };
        self.adapters.insert(stage, adapter);
        self
    }

    pub fn with(mut self, stage: Stage, adapter: Arc<dyn StageAdapter>) -> Self {
        self.insert(stage, adapter);
        self
    }

    pub fn get(&self, stage: Stage) -> Option<&Arc<dyn StageAdapter>> {
        self.adapters.get(&stage)
    }

    pub fn missing_mandatory(&self) -> Option<Stage> {
        Self::MANDATORY
            .iter()
            .copied()
            .find(|s| !self.adapters.contains_key(s))
    }

    /// Wraps every adapter so that its invocations are recorded in `log`.
    pub fn logged(&self, log: &CallLog) -> AdapterSet {
        AdapterSet {
            adapters: self
                .adapters
                .iter()
                .map(|(s, a)| {
                    let wrapped: Arc<dyn StageAdapter> = Arc::new(Logged {
                        inner: a.clone(),
                        log: log.clone(),
                    });
                    (*s, wrapped)
                })
                .collect(),
        }
    }
}

/// Contents of a `{session_id}.pretag.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub session_id: String,
    pub stages: BTreeMap<Stage, StageResult>,
}

impl FixtureFile {
    pub fn file_name(session_id: &str) -> String {
        format!("{session_id}.pretag.json")
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(dir.join(Self::file_name(&self.session_id)), text)
    }
}

/// Reads stage results from sidecar fixture files in a directory.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore { dir: dir.into() }
    }

    pub fn read(&self, session_id: &str) -> Result<FixtureFile, AdapterError> {
        let path = self.dir.join(FixtureFile::file_name(session_id));
        let text = fs::read_to_string(&path)
            .map_err(|e| AdapterError::Failed(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| AdapterError::Failed(format!("{}: {e}", path.display())))
    }

    /// One fixture adapter per stage.
    pub fn adapter_set(&self) -> AdapterSet {
        let mut set = AdapterSet::new();
        for stage in Stage::ORDER {
            set.insert(
                stage,
                Arc::new(FixtureAdapter {
                    store: self.clone(),
                    stage,
                }),
            );
        }
        set
    }
}

pub struct FixtureAdapter {
    store: FixtureStore,
    stage: Stage,
}

impl StageAdapter for FixtureAdapter {
    fn name(&self) -> &str {
        "fixture"
    }

    fn run(&self, request: &StageRequest) -> Result<StageResult, AdapterError> {
        let file = self.store.read(&request.session_id)?;
        match file.stages.get(&self.stage) {
            Some(r) => Ok(r.clone()),
            None if AdapterSet::MANDATORY.contains(&self.stage) => Err(AdapterError::Failed(
                format!("fixture has no {} result", self.stage),
            )),
            None => Err(AdapterError::NotApplicable),
        }
    }
}

/// Calls a model served over HTTP.
pub struct ExternalAdapter {
    name: String,
    endpoint: String,
    single_flight: bool,
}

impl ExternalAdapter {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        ExternalAdapter {
            name: name.into(),
            endpoint: endpoint.into(),
            single_flight: false,
        }
    }

    pub fn single_flight(mut self, yes: bool) -> Self {
        self.single_flight = yes;
        self
    }
}

impl StageAdapter for ExternalAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn run(&self, request: &StageRequest) -> Result<StageResult, AdapterError> {
        let mut response = match ureq::post(&self.endpoint).send_json(request) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(404)) => return Err(AdapterError::NotApplicable),
            Err(e) => return Err(AdapterError::Failed(format!("{}: {e}", self.endpoint))),
        };
        response
            .body_mut()
            .read_json::<StageResult>()
            .map_err(|e| AdapterError::Failed(format!("{}: bad response: {e}", self.endpoint)))
    }

    fn single_flight(&self) -> bool {
        self.single_flight
    }
}
