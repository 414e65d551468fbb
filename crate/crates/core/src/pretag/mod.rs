//! Machine pre-labeling: the stage sequence that turns a raw session into
//! routed, segmented, transcribed and topic-tagged utterance drafts.
//!
//! Every model sits behind [`StageAdapter`]. Stages run in this order, and a
//! rejection stops the sequence:
//!
//! 1. source separation (optional pass-through flag)
//! 2. synthetic speech detection (spoofed sessions are rejected)
//! 3. language identification (unsupported languages are rejected)
//! 4. accent identification (optional; failure leaves the accent blank)
//! 5. speech / music / noise segmentation
//! 6. speaker segmentation
//! 7. gender detection and ASR over the cut utterances
//! 8. topic detection (scraped tags first, then an adapter, then keywords)

mod adapters;
mod cut;
mod decide;
mod pipeline;
mod types;

use thiserror::Error;

pub use adapters::{
    AdapterError, AdapterSet, CallLog, ExternalAdapter, FixtureAdapter, FixtureFile, FixtureStore,
    StageAdapter, StageRequest,
};
pub use cut::{cut_utterances, CutOutcome, Pause, SpeechRun, Uncuttable, UtteranceBound};
pub use decide::{
    detect_topics, gate_prelabels, route_language, score_topics, RouteDecision, TopicScore,
};
pub use pipeline::{run_batch, run_pipeline, PipelineConfig};
pub use types::{
    GatingPolicy, PrelabelMode, PretagBundle, Provenance, RawSessionInput, Routing, SampleFormat,
    SegmentKind, SegmentLabel, SpeakerTurn, Stage, StagePayload, StageResult, TimedWord,
    UtteranceDraft,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PretagError {
    #[error("adapter for {stage} failed: {cause}")]
    AdapterFailure { stage: Stage, cause: String },
    #[error("no adapter configured for mandatory stage {0}")]
    MissingAdapter(Stage),
    #[error("{stage} adapter returned a {found} payload")]
    PayloadMismatch { stage: Stage, found: Stage },
    #[error("{stage} confidence {value} outside [0, 1]")]
    InvalidConfidence { stage: Stage, value: f64 },
    #[error("invalid segments: {0}")]
    InvalidSegments(String),
    #[error("gating policy thresholds must satisfy 0 <= hurt <= help <= 1")]
    InvalidPolicy,
}

impl PretagError {
    /// Stage responsible for the failure, when there is one.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PretagError::AdapterFailure { stage, .. }
            | PretagError::MissingAdapter(stage)
            | PretagError::PayloadMismatch { stage, .. }
            | PretagError::InvalidConfidence { stage, .. } => Some(*stage),
            PretagError::InvalidSegments(_) => Some(Stage::SpeechSegmentation),
            PretagError::InvalidPolicy => None,
        }
    }
}
