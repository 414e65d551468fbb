use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{score, SpeakerEmbedding, SpeakerError, DEFAULT_MATCH_THRESHOLD};
use crate::corpus::SPEAKER_CAP_MINUTES;

const ID_LEN: usize = 16;
const ID_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrolledSpeaker {
    pub speaker_id: String,
    pub centroid: SpeakerEmbedding,
    pub segment_count: u64,
    /// Accumulated enrolled audio, in seconds.
    pub total_seconds: f64,
    pub session_ids: BTreeSet<String>,
}

impl EnrolledSpeaker {
    pub fn total_duration_minutes(&self) -> f64 {
        self.total_seconds / 60.0
    }
}

/// True iff the speaker stays strictly under the per-speaker cap after adding
/// `additional_minutes`.
pub fn cap_eligible(speaker: &EnrolledSpeaker, additional_minutes: f64) -> bool {
    speaker.total_duration_minutes() + additional_minutes < SPEAKER_CAP_MINUTES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub matched: Option<String>,
    /// Best cosine score; -1 when the database is empty.
    pub score: f64,
    pub threshold_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentOutcome {
    pub speaker_id: String,
    pub decision: MatchDecision,
    /// False when the speaker was already at or over the cap, or would be with
    /// these segments. The segments are still enrolled for identification.
    pub packaging_eligible: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionEnrollment {
    pub speakers: BTreeMap<String, EnrollmentOutcome>,
    pub warnings: Vec<String>,
}

/// One line of the enrollment log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EnrollmentEvent {
    Created {
        speaker_id: String,
        embedding: SpeakerEmbedding,
        duration: f64,
        segments: u64,
        session: String,
    },
    Updated {
        speaker_id: String,
        embedding: SpeakerEmbedding,
        duration: f64,
        segments: u64,
        session: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerDbSnapshot {
    pub dimension: usize,
    pub speakers: BTreeMap<String, EnrolledSpeaker>,
}

pub struct SpeakerDb {
    dimension: usize,
    threshold: f64,
    rng: ChaCha8Rng,
    speakers: BTreeMap<String, EnrolledSpeaker>,
    log: Vec<EnrollmentEvent>,
}

fn session_mean(
    segments: &[(SpeakerEmbedding, f64)],
    dim: usize,
) -> Result<(SpeakerEmbedding, f64), SpeakerError> {
    if segments.is_empty() {
        return Err(SpeakerError::EmptySegments);
    }
    let mut sum = vec![0.0; dim];
    let mut seconds = 0.0;
    for (e, d) in segments {
        if e.dim() != dim {
            return Err(SpeakerError::DimensionMismatch(dim, e.dim()));
        }
        if !d.is_finite() || *d <= 0.0 {
            return Err(SpeakerError::BadDuration(*d));
        }
        for (s, x) in sum.iter_mut().zip(e.as_slice()) {
            *s += x;
        }
        seconds += d;
    }
    let n = segments.len() as f64;
    sum.iter_mut().for_each(|x| *x /= n);
    Ok((SpeakerEmbedding::normalize(sum)?, seconds))
}

/// Duration-weighted mean of the current centroid and the new evidence.
fn merged_centroid(
    old: &SpeakerEmbedding,
    old_seconds: f64,
    new: &SpeakerEmbedding,
    new_seconds: f64,
) -> Result<SpeakerEmbedding, SpeakerError> {
    let v: Vec<f64> = old
        .as_slice()
        .iter()
        .zip(new.as_slice())
        .map(|(a, b)| a * old_seconds + b * new_seconds)
        .collect();
    SpeakerEmbedding::normalize(v)
}

impl SpeakerDb {
    pub fn new(dimension: usize, threshold: f64, seed: u64) -> Self {
        SpeakerDb {
            dimension,
            threshold,
            rng: ChaCha8Rng::seed_from_u64(seed),
            speakers: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(super::DEFAULT_DIMENSION, DEFAULT_MATCH_THRESHOLD, seed)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn speakers(&self) -> &BTreeMap<String, EnrolledSpeaker> {
        &self.speakers
    }

    pub fn get(&self, speaker_id: &str) -> Option<&EnrolledSpeaker> {
        self.speakers.get(speaker_id)
    }

    pub fn log(&self) -> &[EnrollmentEvent] {
        &self.log
    }

    /// Fresh anonymized id. Random, so nothing about the source leaks into it.
    pub fn generate_id(&mut self) -> String {
        loop {
            let id: String = (0..ID_LEN)
                .map(|_| ID_ALPHABET[self.rng.gen_range(0..ID_ALPHABET.len())] as char)
                .collect();
            if !self.speakers.contains_key(&id) {
                return id;
            }
        }
    }

    /// Best-matching enrolled speaker for an embedding.
    pub fn identify(&self, embedding: &SpeakerEmbedding) -> Result<MatchDecision, SpeakerError> {
        let mut best: Option<(&str, f64)> = None;
        for (id, sp) in self.speakers.iter() {
            let s = score(embedding, &sp.centroid)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((id, s));
            }
        }
        let (matched, score) = match best {
            Some((id, s)) if s >= self.threshold => (Some(id.to_string()), s),
            Some((_, s)) => (None, s),
            None => (None, -1.0),
        };
        Ok(MatchDecision {
            matched,
            score,
            threshold_used: self.threshold,
        })
    }

    /// Enrolls one local speaker of a session: matches the averaged segment
    /// embedding against the database, then updates the match or creates a
    /// new identity.
    pub fn enroll_session_speaker(
        &mut self,
        session_id: &str,
        segments: &[(SpeakerEmbedding, f64)],
    ) -> Result<EnrollmentOutcome, SpeakerError> {
        let (mean, seconds) = session_mean(segments, self.dimension)?;
        let decision = self.identify(&mean)?;
        let count = segments.len() as u64;
        let (event, eligible) = match &decision.matched {
            Some(id) => {
                let eligible = cap_eligible(&self.speakers[id], seconds / 60.0);
                (
                    EnrollmentEvent::Updated {
                        speaker_id: id.clone(),
                        embedding: mean,
                        duration: seconds,
                        segments: count,
                        session: session_id.to_string(),
                    },
                    eligible,
                )
            }
            None => (
                EnrollmentEvent::Created {
                    speaker_id: self.generate_id(),
                    embedding: mean,
                    duration: seconds,
                    segments: count,
                    session: session_id.to_string(),
                },
                seconds / 60.0 < SPEAKER_CAP_MINUTES,
            ),
        };
        let speaker_id = self.apply(&event)?;
        self.log.push(event);
        Ok(EnrollmentOutcome {
            speaker_id,
            decision,
            packaging_eligible: eligible,
        })
    }

    /// Enrolls every local speaker of a session in order. Two local speakers
    /// resolving to the same identity are merged and a warning is emitted,
    /// since that usually points at a diarization error.
    pub fn enroll_session(
        &mut self,
        session_id: &str,
        local_speakers: &[(String, Vec<(SpeakerEmbedding, f64)>)],
    ) -> Result<SessionEnrollment, SpeakerError> {
        let mut out = SessionEnrollment::default();
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for (local, segments) in local_speakers {
            let outcome = self.enroll_session_speaker(session_id, segments)?;
            if let Some(first) = seen.get(&outcome.speaker_id) {
                out.warnings.push(format!(
                    "session {session_id}: local speakers {first} and {local} both resolved to {}",
                    outcome.speaker_id
                ));
            } else {
                seen.insert(outcome.speaker_id.clone(), local.clone());
            }
            out.speakers.insert(local.clone(), outcome);
        }
        Ok(out)
    }

    fn apply(&mut self, event: &EnrollmentEvent) -> Result<String, SpeakerError> {
        match event {
            EnrollmentEvent::Created {
                speaker_id,
                embedding,
                duration,
                segments,
                session,
            } => {
                if embedding.dim() != self.dimension {
                    return Err(SpeakerError::DimensionMismatch(
                        self.dimension,
                        embedding.dim(),
                    ));
                }
                if self.speakers.contains_key(speaker_id) {
                    return Err(SpeakerError::Log(format!(
                        "speaker {speaker_id} created twice"
                    )));
                }
                self.speakers.insert(
                    speaker_id.clone(),
                    EnrolledSpeaker {
                        speaker_id: speaker_id.clone(),
                        centroid: embedding.clone(),
                        segment_count: *segments,
                        total_seconds: *duration,
                        session_ids: [session.clone()].into(),
                    },
                );
                Ok(speaker_id.clone())
            }
            EnrollmentEvent::Updated {
                speaker_id,
                embedding,
                duration,
                segments,
                session,
            } => {
                let sp = self.speakers.get_mut(speaker_id).ok_or_else(|| {
                    SpeakerError::Log(format!("update of unknown speaker {speaker_id}"))
                })?;
                sp.centroid =
                    merged_centroid(&sp.centroid, sp.total_seconds, embedding, *duration)?;
                sp.total_seconds += duration;
                sp.segment_count += segments;
                sp.session_ids.insert(session.clone());
                Ok(speaker_id.clone())
            }
        }
    }

    pub fn snapshot(&self) -> SpeakerDbSnapshot {
        SpeakerDbSnapshot {
            dimension: self.dimension,
            speakers: self.speakers.clone(),
        }
    }

    /// Canonical snapshot bytes.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes")
    }

    /// Rebuilds a database by replaying an enrollment log.
    pub fn replay(
        dimension: usize,
        threshold: f64,
        seed: u64,
        events: &[EnrollmentEvent],
    ) -> Result<Self, SpeakerError> {
        let mut db = SpeakerDb::new(dimension, threshold, seed);
        for e in events {
            db.apply(e)?;
            db.log.push(e.clone());
        }
        Ok(db)
    }

    pub fn write_log(&self, path: impl AsRef<Path>) -> Result<(), SpeakerError> {
        let mut f = fs::File::create(path)?;
        for e in &self.log {
            let line = serde_json::to_string(e).map_err(|e| SpeakerError::Log(e.to_string()))?;
            writeln!(f, "{line}")?;
        }
        f.sync_all()?;
        Ok(())
    }

    pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EnrollmentEvent>, SpeakerError> {
        let f = fs::File::open(path)?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| SpeakerError::Log(format!("line {}: {e}", i + 1)))?,
            );
        }
        Ok(out)
    }
}

/// Single-writer, multi-reader handle.
#[derive(Clone)]
pub struct SharedSpeakerDb(Arc<RwLock<SpeakerDb>>);

impl SharedSpeakerDb {
    pub fn new(db: SpeakerDb) -> Self {
        SharedSpeakerDb(Arc::new(RwLock::new(db)))
    }

    pub fn identify(&self, embedding: &SpeakerEmbedding) -> Result<MatchDecision, SpeakerError> {
        self.0
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .identify(embedding)
    }

    pub fn enroll_session(
        &self,
        session_id: &str,
        local_speakers: &[(String, Vec<(SpeakerEmbedding, f64)>)],
    ) -> Result<SessionEnrollment, SpeakerError> {
        self.0
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .enroll_session(session_id, local_speakers)
    }

    pub fn snapshot(&self) -> SpeakerDbSnapshot {
        self.0.read().unwrap_or_else(|e| e.into_inner()).snapshot()
    }
}
