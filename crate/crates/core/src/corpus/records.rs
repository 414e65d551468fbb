//! The four metadata levels: dataset manifest, session, utterance and speaker.
//!
//! Field names follow the interchange format verbatim, including the
//! `utterce_id` / `utterce_ids_list` spellings used at utterance and speaker
//! level, `session brief title` with spaces and the capitalised
//! `Topics_by_hours` / `Topics_by_speakers` manifest keys. Fields that are not
//! part of the schema are kept in `extra` and written back unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Unknown JSON fields carried through a load/save cycle.
pub type ExtraFields = BTreeMap<String, Value>;

/// Background noise condition of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseBackground {
    Clean,
    Noisy,
    Music,
}

impl NoiseBackground {
    pub const ALL: [NoiseBackground; 3] = [Self::Clean, Self::Noisy, Self::Music];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Clean => "clean",
            Self::Noisy => "noisy",
            Self::Music => "music",
        }
    }
}

impl std::fmt::Display for NoiseBackground {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    #[serde(rename = "utterce_id")]
    pub utterance_id: String,
    pub speaker_id: String,
    pub session_id: String,
    pub audio_path: String,
    pub duration_in_seconds: f64,
    pub domains: Vec<String>,
    pub topics: Vec<String>,
    pub transcription: String,
    pub language: String,
    pub accent: String,
    /// Open vocabulary, checked against `CorpusConfig::genders`.
    pub gender: String,
    pub noise_background: NoiseBackground,
    pub sampling_rate: u32,
    pub sampling_bit: u32,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl UtteranceRecord {
    pub const REQUIRED: &'static [&'static str] = &[
        "utterce_id",
        "speaker_id",
        "session_id",
        "audio_path",
        "duration_in_seconds",
        "domains",
        "topics",
        "transcription",
        "language",
        "accent",
        "gender",
        "noise_background",
        "sampling_rate",
        "sampling_bit",
    ];

    pub fn hours(&self) -> f64 {
        self.duration_in_seconds / 3600.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub audio_path: String,
    pub duration_in_minutes: f64,
    pub utterance_ids_list: Vec<String>,
    pub speakers: Vec<String>,
    #[serde(rename = "session brief title")]
    pub session_brief_title: String,
    pub domains: Vec<String>,
    pub topics: Vec<String>,
    pub language: String,
    pub accent: String,
    pub noise_background: NoiseBackground,
    pub sampling_rate: u32,
    pub sampling_bit: u32,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl SessionRecord {
    pub const REQUIRED: &'static [&'static str] = &[
        "session_id",
        "audio_path",
        "duration_in_minutes",
        "utterance_ids_list",
        "speakers",
        "session brief title",
        "domains",
        "topics",
        "language",
        "accent",
        "noise_background",
        "sampling_rate",
        "sampling_bit",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRecord {
    pub speaker_id: String,
    #[serde(rename = "utterce_ids_list")]
    pub utterance_ids_list: Vec<String>,
    /// Session ids the speaker appears in.
    pub context_ids_list: Vec<String>,
    pub duration_in_minutes: f64,
    pub language: String,
    pub accent: String,
    pub gender: String,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl SpeakerRecord {
    pub const REQUIRED: &'static [&'static str] = &[
        "speaker_id",
        "utterce_ids_list",
        "context_ids_list",
        "duration_in_minutes",
        "language",
        "accent",
        "gender",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub speechdb_name: String,
    pub language: String,
    pub accent: String,
    pub duration_in_hours: f64,
    pub speakers_cnt: u64,
    pub utterances_cnt: u64,
    #[serde(rename = "Topics_by_hours")]
    pub topics_by_hours: BTreeMap<String, f64>,
    #[serde(rename = "Topics_by_speakers")]
    pub topics_by_speakers: BTreeMap<String, u64>,
    pub gender_dist_by_hours: BTreeMap<String, f64>,
    pub gender_dist_by_speakers: BTreeMap<String, u64>,
    pub noisetype_dist_by_hours: BTreeMap<String, f64>,
    pub sampling_rate: u32,
    pub sampling_bit: u32,
    pub audio_channels: u32,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl DatasetManifest {
    pub const REQUIRED: &'static [&'static str] = &[
        "speechdb_name",
        "language",
        "accent",
        "duration_in_hours",
        "speakers_cnt",
        "utterances_cnt",
        "Topics_by_hours",
        "Topics_by_speakers",
        "gender_dist_by_hours",
        "gender_dist_by_speakers",
        "noisetype_dist_by_hours",
        "sampling_rate",
        "sampling_bit",
        "audio_channels",
    ];

    /// A manifest describing no audio at all.
    pub fn empty(
        speechdb_name: impl Into<String>,
        language: impl Into<String>,
        accent: impl Into<String>,
    ) -> Self {
        DatasetManifest {
            speechdb_name: speechdb_name.into(),
            language: language.into(),
            accent: accent.into(),
            duration_in_hours: 0.0,
            speakers_cnt: 0,
            utterances_cnt: 0,
            topics_by_hours: BTreeMap::new(),
            topics_by_speakers: BTreeMap::new(),
            gender_dist_by_hours: BTreeMap::new(),
            gender_dist_by_speakers: BTreeMap::new(),
            noisetype_dist_by_hours: BTreeMap::new(),
            sampling_rate: super::SAMPLING_RATE,
            sampling_bit: super::SAMPLING_BIT,
            audio_channels: 1,
            extra: ExtraFields::new(),
        }
    }
}
