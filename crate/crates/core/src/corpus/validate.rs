use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    approx_eq, Corpus, CorpusConfig, MAX_UTTERANCE_SECONDS, SAMPLING_BIT, SAMPLING_RATE,
    SPEAKER_CAP_MINUTES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Invariant {
    NonpositiveDuration,
    UtteranceTooLong,
    BadSampleFormat,
    DomainNotInTopics,
    UnknownTopic,
    UnknownGender,
    MissingReference,
    SessionUtterancesMismatch,
    SessionSpeakersMismatch,
    SessionTooShort,
    SpeakerCapExceeded,
    SpeakerDurationMismatch,
    SpeakerSessionsMismatch,
    SpeakerUtterancesMismatch,
    SpeakerGenderMismatch,
    ManifestDurationMismatch,
    ManifestCountMismatch,
    ManifestGenderHoursMismatch,
    ManifestGenderSpeakersMismatch,
    ManifestNoiseHoursMismatch,
    ManifestChannels,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub record_id: String,
    pub invariant: Invariant,
    pub details: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_kind(&self, invariant: Invariant) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(move |v| v.invariant == invariant)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, record_id: &str, invariant: Invariant, details: impl Into<String>) {
        self.0.push(Violation {
            record_id: record_id.to_string(),
            invariant,
            details: details.into(),
        });
    }
}

fn check_topics(
    out: &mut Collector,
    id: &str,
    domains: &[String],
    topics: &[String],
    config: &CorpusConfig,
) {
    for d in domains {
        if !topics.contains(d) {
            out.push(
                id,
                Invariant::DomainNotInTopics,
                format!("domain `{d}` missing from topics"),
            );
        }
    }
    for t in topics {
        if !config.topics.contains(t) {
            out.push(
                id,
                Invariant::UnknownTopic,
                format!("topic `{t}` not in vocabulary"),
            );
        }
    }
}

fn check_format(out: &mut Collector, id: &str, rate: u32, bit: u32) {
    if rate != SAMPLING_RATE || bit != SAMPLING_BIT {
        out.push(
            id,
            Invariant::BadSampleFormat,
            format!("{rate} Hz / {bit} bit, expected {SAMPLING_RATE} Hz / {SAMPLING_BIT} bit"),
        );
    }
}

fn set_diff(listed: &[String], actual: &BTreeSet<&str>) -> Option<String> {
    let listed: BTreeSet<&str> = listed.iter().map(String::as_str).collect();
    if listed == *actual {
        return None;
    }
    let extra: Vec<_> = listed.difference(actual).collect();
    let missing: Vec<_> = actual.difference(&listed).collect();
    Some(format!(
        "listed but absent: {extra:?}; present but unlisted: {missing:?}"
    ))
}

/// Checks every record-level and cross-level invariant. Violations are data:
/// the report is sorted by record id, then invariant.
pub fn validate_corpus(corpus: &Corpus, config: &CorpusConfig) -> ValidationReport {
    let tol = config.duration_tolerance;
    let mut out = Collector(Vec::new());

    for u in corpus.utterances.values() {
        let id = u.utterance_id.as_str();
        let d = u.duration_in_seconds;
        if d.is_nan() || d <= 0.0 {
            out.push(id, Invariant::NonpositiveDuration, format!("{d} s"));
        } else if d > MAX_UTTERANCE_SECONDS {
            out.push(
                id,
                Invariant::UtteranceTooLong,
                format!("{d} s > {MAX_UTTERANCE_SECONDS} s"),
            );
        }
        check_format(&mut out, id, u.sampling_rate, u.sampling_bit);
        check_topics(&mut out, id, &u.domains, &u.topics, config);
        if !config.genders.contains(&u.gender) {
            out.push(id, Invariant::UnknownGender, format!("`{}`", u.gender));
        }
        if !corpus.sessions.contains_key(&u.session_id) {
            out.push(
                id,
                Invariant::MissingReference,
                format!("session `{}`", u.session_id),
            );
        }
        match corpus.speakers.get(&u.speaker_id) {
            None => out.push(
                id,
                Invariant::MissingReference,
                format!("speaker `{}`", u.speaker_id),
            ),
            Some(sp) if sp.gender != u.gender => out.push(
                &sp.speaker_id,
                Invariant::SpeakerGenderMismatch,
                format!(
                    "utterance `{id}` is `{}`, speaker is `{}`",
                    u.gender, sp.gender
                ),
            ),
            Some(_) => {}
        }
    }

    let by_session = corpus.utterances_by_session();
    for s in corpus.sessions.values() {
        let id = s.session_id.as_str();
        let members = by_session.get(id).cloned().unwrap_or_default();
        let member_ids: BTreeSet<&str> = members.iter().map(|u| u.utterance_id.as_str()).collect();
        for listed in s.utterance_ids_list.iter() {
            if !corpus.utterances.contains_key(listed) {
                out.push(
                    id,
                    Invariant::MissingReference,
                    format!("utterance `{listed}`"),
                );
            }
        }
        if let Some(d) = set_diff(&s.utterance_ids_list, &member_ids) {
            out.push(id, Invariant::SessionUtterancesMismatch, d);
        }
        let speakers: BTreeSet<&str> = members.iter().map(|u| u.speaker_id.as_str()).collect();
        if let Some(d) = set_diff(&s.speakers, &speakers) {
            out.push(id, Invariant::SessionSpeakersMismatch, d);
        }
        let speech_minutes = members.iter().map(|u| u.duration_in_seconds).sum::<f64>() / 60.0;
        if s.duration_in_minutes < speech_minutes
            && !approx_eq(s.duration_in_minutes, speech_minutes, tol)
        {
            out.push(
                id,
                Invariant::SessionTooShort,
                format!(
                    "{} min < {speech_minutes} min of utterances",
                    s.duration_in_minutes
                ),
            );
        }
        check_format(&mut out, id, s.sampling_rate, s.sampling_bit);
        check_topics(&mut out, id, &s.domains, &s.topics, config);
    }

    let by_speaker = corpus.utterances_by_speaker();
    for sp in corpus.speakers.values() {
        let id = sp.speaker_id.as_str();
        let members = by_speaker.get(id).cloned().unwrap_or_default();
        let computed = members.iter().map(|u| u.duration_in_seconds).sum::<f64>() / 60.0;
        let minutes = sp.duration_in_minutes.max(computed);
        if minutes >= SPEAKER_CAP_MINUTES {
            out.push(
                id,
                Invariant::SpeakerCapExceeded,
                format!("{minutes} min >= {SPEAKER_CAP_MINUTES} min"),
            );
        }
        if !approx_eq(sp.duration_in_minutes, computed, tol) {
            out.push(
                id,
                Invariant::SpeakerDurationMismatch,
                format!(
                    "record {} min, utterances sum to {computed} min",
                    sp.duration_in_minutes
                ),
            );
        }
        let utt_ids: BTreeSet<&str> = members.iter().map(|u| u.utterance_id.as_str()).collect();
        if let Some(d) = set_diff(&sp.utterance_ids_list, &utt_ids) {
            out.push(id, Invariant::SpeakerUtterancesMismatch, d);
        }
        let sessions: BTreeSet<&str> = members.iter().map(|u| u.session_id.as_str()).collect();
        if let Some(d) = set_diff(&sp.context_ids_list, &sessions) {
            out.push(id, Invariant::SpeakerSessionsMismatch, d);
        }
        if !config.genders.contains(&sp.gender) {
            out.push(id, Invariant::UnknownGender, format!("`{}`", sp.gender));
        }
    }

    let m = &corpus.manifest;
    let id = m.speechdb_name.as_str();
    let total_hours = corpus
        .utterances
        .values()
        .map(|u| u.duration_in_seconds)
        .sum::<f64>()
        / 3600.0;
    if !approx_eq(m.duration_in_hours, total_hours, tol) {
        out.push(
            id,
            Invariant::ManifestDurationMismatch,
            format!(
                "manifest {} h, utterances sum to {total_hours} h",
                m.duration_in_hours
            ),
        );
    }
    let distinct_speakers = by_speaker.len() as u64;
    if m.utterances_cnt != corpus.utterances.len() as u64 || m.speakers_cnt != distinct_speakers {
        out.push(
            id,
            Invariant::ManifestCountMismatch,
            format!(
                "manifest {} utterances / {} speakers, corpus has {} / {}",
                m.utterances_cnt,
                m.speakers_cnt,
                corpus.utterances.len(),
                distinct_speakers
            ),
        );
    }
    let gender_hours: f64 = m.gender_dist_by_hours.values().sum();
    if !approx_eq(gender_hours, m.duration_in_hours, tol) {
        out.push(
            id,
            Invariant::ManifestGenderHoursMismatch,
            format!(
                "gender hours sum to {gender_hours}, duration {}",
                m.duration_in_hours
            ),
        );
    }
    let gender_speakers: u64 = m.gender_dist_by_speakers.values().sum();
    if gender_speakers != m.speakers_cnt {
        out.push(
            id,
            Invariant::ManifestGenderSpeakersMismatch,
            format!(
                "gender speakers sum to {gender_speakers}, speakers_cnt {}",
                m.speakers_cnt
            ),
        );
    }
    let noise_hours: f64 = m.noisetype_dist_by_hours.values().sum();
    if !approx_eq(noise_hours, m.duration_in_hours, tol) {
        out.push(
            id,
            Invariant::ManifestNoiseHoursMismatch,
            format!(
                "noise hours sum to {noise_hours}, duration {}",
                m.duration_in_hours
            ),
        );
    }
    if m.audio_channels != 1 {
        out.push(
            id,
            Invariant::ManifestChannels,
            format!("{} channels", m.audio_channels),
        );
    }
    check_format(&mut out, id, m.sampling_rate, m.sampling_bit);

    let mut violations = out.0;
    violations.sort();
    ValidationReport { violations }
}
