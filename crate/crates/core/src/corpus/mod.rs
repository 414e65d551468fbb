//! Four-level corpus metadata: records, loading and saving, validation and
//! dataset-level aggregation.

mod io;
mod name;
mod records;
mod stats;
mod synth;
mod topics;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_corpus, save_corpus};
pub use name::{render_name, DatasetKind, DatasetName};
pub use records::{
    DatasetManifest, ExtraFields, NoiseBackground, SessionRecord, SpeakerRecord, UtteranceRecord,
};
pub use stats::aggregate_stats;
pub use synth::{synth_corpus, SynthSpec};
pub use topics::{TopicCategory, TopicVocabulary};
pub use validate::{validate_corpus, Invariant, ValidationReport, Violation};

pub const SAMPLING_RATE: u32 = 16_000;
pub const SAMPLING_BIT: u32 = 16;
/// Longest admissible utterance, in seconds.
pub const MAX_UTTERANCE_SECONDS: f64 = 20.0;
/// Per-speaker contribution must stay strictly below this many minutes.
pub const SPEAKER_CAP_MINUTES: f64 = 60.0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed JSON in {file}: {reason}")]
    MalformedJson { file: PathBuf, reason: String },
    #[error("missing field `{field}` in {file}")]
    MissingField { file: PathBuf, field: String },
    #[error("dangling reference to `{0}`")]
    DanglingReference(String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("expected exactly one manifest file in {dir}, found {found}")]
    Manifest { dir: PathBuf, found: usize },
    #[error("speaker `{0}` carries more than one gender")]
    InconsistentGender(String),
    #[error("invalid release date `{0}`")]
    InvalidDate(String),
    #[error("empty name segment `{0}`")]
    EmptySegment(&'static str),
    #[error("invalid name segment `{field}`: {value}")]
    InvalidSegment { field: &'static str, value: String },
    #[error("`{0}` is not a valid dataset name")]
    InvalidName(String),
    #[error("cannot read {file}: {source}")]
    IoRead {
        file: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {file}: {source}")]
    IoWrite {
        file: PathBuf,
        source: std::io::Error,
    },
}

/// Knobs for validation: vocabularies and the cross-level tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub topics: TopicVocabulary,
    pub genders: BTreeSet<String>,
    /// Relative tolerance for duration consistency across levels.
    pub duration_tolerance: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            topics: TopicVocabulary::default(),
            genders: ["male", "female"].iter().map(|s| s.to_string()).collect(),
            duration_tolerance: 1e-6,
        }
    }
}

/// All four record levels, indexed by id. Treated as an immutable value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub manifest: DatasetManifest,
    pub sessions: BTreeMap<String, SessionRecord>,
    pub utterances: BTreeMap<String, UtteranceRecord>,
    pub speakers: BTreeMap<String, SpeakerRecord>,
}

impl Corpus {
    pub fn empty(manifest: DatasetManifest) -> Self {
        Corpus {
            manifest,
            sessions: BTreeMap::new(),
            utterances: BTreeMap::new(),
            speakers: BTreeMap::new(),
        }
    }

    /// Checks that every id referenced across levels resolves.
    pub fn check_references(&self) -> Result<(), CorpusError> {
        for u in self.utterances.values() {
            if !self.sessions.contains_key(&u.session_id) {
                return Err(CorpusError::DanglingReference(u.session_id.clone()));
            }
            if !self.speakers.contains_key(&u.speaker_id) {
                return Err(CorpusError::DanglingReference(u.speaker_id.clone()));
            }
        }
        for s in self.sessions.values() {
            for id in s.utterance_ids_list.iter() {
                if !self.utterances.contains_key(id) {
                    return Err(CorpusError::DanglingReference(id.clone()));
                }
            }
            for id in s.speakers.iter() {
                if !self.speakers.contains_key(id) {
                    return Err(CorpusError::DanglingReference(id.clone()));
                }
            }
        }
        for sp in self.speakers.values() {
            for id in sp.utterance_ids_list.iter() {
                if !self.utterances.contains_key(id) {
                    return Err(CorpusError::DanglingReference(id.clone()));
                }
            }
            for id in sp.context_ids_list.iter() {
                if !self.sessions.contains_key(id) {
                    return Err(CorpusError::DanglingReference(id.clone()));
                }
            }
        }
        Ok(())
    }

    /// Utterances grouped by speaker id.
    pub fn utterances_by_speaker(&self) -> BTreeMap<&str, Vec<&UtteranceRecord>> {
        let mut out: BTreeMap<&str, Vec<&UtteranceRecord>> = BTreeMap::new();
        for u in self.utterances.values() {
            out.entry(u.speaker_id.as_str()).or_default().push(u);
        }
        out
    }

    pub fn utterances_by_session(&self) -> BTreeMap<&str, Vec<&UtteranceRecord>> {
        let mut out: BTreeMap<&str, Vec<&UtteranceRecord>> = BTreeMap::new();
        for u in self.utterances.values() {
            out.entry(u.session_id.as_str()).or_default().push(u);
        }
        out
    }

    /// Builds a consistent corpus containing only `utterance_ids`: session and
    /// speaker records are trimmed to the kept utterances and speaker durations
    /// recomputed. The manifest is recomputed with the given name.
    pub fn subset<'a>(
        &self,
        utterance_ids: impl IntoIterator<Item = &'a str>,
        speechdb_name: &str,
    ) -> Result<Corpus, CorpusError> {
        let keep: BTreeSet<&str> = utterance_ids.into_iter().collect();
        let mut out = Corpus::empty(DatasetManifest::empty(
            speechdb_name,
            self.manifest.language.clone(),
            self.manifest.accent.clone(),
        ));
        out.manifest.extra = self.manifest.extra.clone();
        for id in keep.iter() {
            let u = self
                .utterances
                .get(*id)
                .ok_or_else(|| CorpusError::DanglingReference(id.to_string()))?;
            out.utterances.insert(u.utterance_id.clone(), u.clone());
        }
        let mut sessions = BTreeMap::new();
        for (sid, utts) in out.utterances_by_session() {
            let src = self
                .sessions
                .get(sid)
                .ok_or_else(|| CorpusError::DanglingReference(sid.to_string()))?;
            let mut s = src.clone();
            s.utterance_ids_list.retain(|id| keep.contains(id.as_str()));
            let speakers: BTreeSet<&str> = utts.iter().map(|u| u.speaker_id.as_str()).collect();
            s.speakers.retain(|sp| speakers.contains(sp.as_str()));
            for sp in speakers {
                if !s.speakers.iter().any(|x| x == sp) {
                    s.speakers.push(sp.to_string());
                }
            }
            sessions.insert(s.session_id.clone(), s);
        }
        let mut speakers = BTreeMap::new();
        for (spid, utts) in out.utterances_by_speaker() {
            let src = self
                .speakers
                .get(spid)
                .ok_or_else(|| CorpusError::DanglingReference(spid.to_string()))?;
            let mut sp = src.clone();
            sp.utterance_ids_list
                .retain(|id| keep.contains(id.as_str()));
            let sessions: BTreeSet<&str> = utts.iter().map(|u| u.session_id.as_str()).collect();
            sp.context_ids_list
                .retain(|c| sessions.contains(c.as_str()));
            sp.duration_in_minutes = utts.iter().map(|u| u.duration_in_seconds).sum::<f64>() / 60.0;
            speakers.insert(sp.speaker_id.clone(), sp);
        }
        out.sessions = sessions;
        out.speakers = speakers;
        out.manifest = aggregate_stats(&out)?;
        Ok(out)
    }
}

/// `|a - b| <= tol * max(|a|, |b|)`, with an absolute floor for values near zero.
pub(crate) fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale.max(1e-9)
}
