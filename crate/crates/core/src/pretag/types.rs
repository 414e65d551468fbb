use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Sample format declared by the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFormat {
    pub sampling_rate: u32,
    pub sampling_bit: u32,
}

impl Default for SampleFormat {
    fn default() -> Self {
        SampleFormat {
            sampling_rate: crate::corpus::SAMPLING_RATE,
            sampling_bit: crate::corpus::SAMPLING_BIT,
        }
    }
}

/// A raw session as collected or scraped, before any machine labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSessionInput {
    pub session_id: String,
    pub audio_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// Tags scraped with the source, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    #[serde(default)]
    pub sample_format: SampleFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    SourceSeparation,
    SyntheticDetection,
    LanguageID,
    AccentID,
    SpeechSegmentation,
    SpeakerSegmentation,
    GenderDetection,
    ASR,
    TopicDetection,
}

impl Stage {
    /// Execution order of the pipeline.
    pub const ORDER: [Stage; 9] = [
        Stage::SourceSeparation,
        Stage::SyntheticDetection,
        Stage::LanguageID,
        Stage::AccentID,
        Stage::SpeechSegmentation,
        Stage::SpeakerSegmentation,
        Stage::GenderDetection,
        Stage::ASR,
        Stage::TopicDetection,
    ];

    pub fn position(self) -> usize {
        Self::ORDER
            .iter()
            .position(|s| *s == self)
            .expect("stage in order")
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Speech,
    Music,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub start: f64,
    pub end: f64,
    pub kind: SegmentKind,
    /// Local (per-session) speaker label; only set on speech.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_local_id: Option<String>,
}

impl SegmentLabel {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// "Who spoke when" output of speaker segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTurn {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    pub start: f64,
    pub end: f64,
    pub word: String,
}

/// Stage-specific payload. The variant must match the stage that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StagePayload {
    SourceSeparation {
        applied: bool,
    },
    SyntheticDetection {
        spoofed: bool,
    },
    LanguageId {
        language: String,
    },
    AccentId {
        #[serde(default)]
        accent: Option<String>,
    },
    SpeechSegmentation {
        segments: Vec<SegmentLabel>,
    },
    SpeakerSegmentation {
        turns: Vec<SpeakerTurn>,
    },
    GenderDetection {
        genders: BTreeMap<String, String>,
    },
    Asr {
        words: Vec<TimedWord>,
        /// Estimated word error rate; when present, confidence is `1 - wer`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wer: Option<f64>,
    },
    TopicDetection {
        topics: Vec<String>,
    },
}

impl StagePayload {
    pub fn stage(&self) -> Stage {
        match self {
            StagePayload::SourceSeparation { .. } => Stage::SourceSeparation,
            StagePayload::SyntheticDetection { .. } => Stage::SyntheticDetection,
            StagePayload::LanguageId { .. } => Stage::LanguageID,
            StagePayload::AccentId { .. } => Stage::AccentID,
            StagePayload::SpeechSegmentation { .. } => Stage::SpeechSegmentation,
            StagePayload::SpeakerSegmentation { .. } => Stage::SpeakerSegmentation,
            StagePayload::GenderDetection { .. } => Stage::GenderDetection,
            StagePayload::Asr { .. } => Stage::ASR,
            StagePayload::TopicDetection { .. } => Stage::TopicDetection,
        }
    }
}

/// Which model produced a result, plus its reported benchmark figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub adapter: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_metric: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: Stage,
    pub payload: StagePayload,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl StageResult {
    pub fn new(payload: StagePayload, confidence: f64, adapter: &str) -> Self {
        StageResult {
            stage: payload.stage(),
            payload,
            confidence,
            provenance: Provenance {
                adapter: adapter.to_string(),
                version: "1".to_string(),
                reported_metric: None,
            },
        }
    }
}

/// Thresholds separating harmful from helpful pre-labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatingPolicy {
    /// Below this, pre-labels slow annotators down and hurt accuracy.
    pub hurt_threshold: f64,
    /// At or above this, pre-labels are shown to annotators.
    pub help_threshold: f64,
}

impl Default for GatingPolicy {
    fn default() -> Self {
        GatingPolicy {
            hurt_threshold: 0.70,
            help_threshold: 0.85,
        }
    }
}

impl GatingPolicy {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.hurt_threshold)
            && (0.0..=1.0).contains(&self.help_threshold)
            && self.hurt_threshold <= self.help_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrelabelMode {
    Assisted,
    FromScratch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision")]
pub enum Routing {
    Accepted {
        language: String,
        #[serde(default)]
        accent: Option<String>,
    },
    RejectedSynthetic,
    RejectedUnsupportedLanguage {
        language: String,
    },
}

impl Routing {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Routing::Accepted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceDraft {
    pub start: f64,
    pub end: f64,
    pub speaker_local_id: String,
    pub transcript: String,
    pub asr_confidence: f64,
}

impl UtteranceDraft {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Everything the machine stages produced for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretagBundle {
    pub session_id: String,
    pub routing: Routing,
    pub language_confidence: Option<f64>,
    pub source_separated: bool,
    pub segments: Vec<SegmentLabel>,
    pub drafts: Vec<UtteranceDraft>,
    pub genders: BTreeMap<String, String>,
    pub topics: Vec<String>,
    pub prelabel_mode: PrelabelMode,
    /// Speech runs that had to be hard-cut because they had no pause.
    pub uncuttable: Vec<super::Uncuttable>,
    pub provenance: Vec<Provenance>,
}

impl PretagBundle {
    pub fn rejected(session_id: &str, routing: Routing, provenance: Vec<Provenance>) -> Self {
        PretagBundle {
            session_id: session_id.to_string(),
            routing,
            language_confidence: None,
            source_separated: false,
            segments: Vec::new(),
            drafts: Vec::new(),
            genders: BTreeMap::new(),
            topics: Vec::new(),
            prelabel_mode: PrelabelMode::FromScratch,
            uncuttable: Vec::new(),
            provenance,
        }
    }
}
