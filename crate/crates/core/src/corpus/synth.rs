use std::collections::BTreeMap;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    aggregate_stats, Corpus, CorpusError, DatasetManifest, NoiseBackground, SessionRecord,
    SpeakerRecord, TopicVocabulary, UtteranceRecord, SAMPLING_BIT, SAMPLING_RATE,
};

/// Shape of a generated corpus. Every generated corpus passes validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub sessions: usize,
    /// Inclusive range.
    pub utterances_per_session: (usize, usize),
    pub speakers: usize,
    pub max_speakers_per_session: usize,
    /// Inclusive range of utterance lengths in seconds, at most 20.
    pub duration_seconds: (f64, f64),
    pub topics: Vec<String>,
    pub max_topics_per_utterance: usize,
    pub genders: Vec<String>,
    pub noise: Vec<NoiseBackground>,
    pub language: String,
    pub accents: Vec<String>,
    pub name: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let vocab = TopicVocabulary::default();
        SynthSpec {
            sessions: 20,
            utterances_per_session: (3, 12),
            speakers: 12,
            max_speakers_per_session: 3,
            duration_seconds: (2.0, 20.0),
            topics: vocab.category_names().take(6).map(str::to_string).collect(),
            max_topics_per_utterance: 2,
            genders: vec!["female".into(), "male".into()],
            noise: NoiseBackground::ALL.to_vec(),
            language: "English".into(),
            accents: vec!["en-us".into()],
            name: "synthetic".into(),
        }
    }
}

const WORDS: &[&str] = &[
    "the", "a", "we", "they", "said", "today", "game", "market", "rain", "city", "music", "team",
    "price", "new", "people", "night", "morning", "report", "after", "before", "points", "season",
    "show", "road", "health", "school", "weather", "film", "money", "win",
];

const ID_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

fn random_id(rng: &mut impl Rng, len: usize) -> String {
    (0..len)
        .map(|_| ID_CHARS[rng.gen_range(0..ID_CHARS.len())] as char)
        .collect()
}

fn sentence(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(5..=14);
    (0..n)
        .map(|_| *WORDS.choose(rng).expect("words"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Speaker cap headroom kept by the generator, in seconds.
const SPEAKER_BUDGET_SECONDS: f64 = 59.0 * 60.0;

/// Builds a random but fully consistent corpus.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.duration_seconds;
    let mut speakers: Vec<SpeakerRecord> = Vec::new();
    let mut speaker_seconds: Vec<f64> = Vec::new();
    let new_speaker = |rng: &mut ChaCha8Rng,
                       speakers: &mut Vec<SpeakerRecord>,
                       secs: &mut Vec<f64>,
                       accent: &str| {
        speakers.push(SpeakerRecord {
            speaker_id: random_id(rng, 16),
            utterance_ids_list: Vec::new(),
            context_ids_list: Vec::new(),
            duration_in_minutes: 0.0,
            language: spec.language.clone(),
            accent: accent.to_string(),
            gender: spec
                .genders
                .choose(rng)
                .cloned()
                .unwrap_or_else(|| "male".into()),
            extra: BTreeMap::new(),
        });
        secs.push(0.0);
        speakers.len() - 1
    };
    let default_accent = spec
        .accents
        .first()
        .cloned()
        .unwrap_or_else(|| "en-us".into());
    for _ in 0..spec.speakers {
        let accent = spec
            .accents
            .choose(&mut rng)
            .cloned()
            .unwrap_or_else(|| default_accent.clone());
        new_speaker(&mut rng, &mut speakers, &mut speaker_seconds, &accent);
    }

    let mut corpus = Corpus::empty(DatasetManifest::empty(
        &spec.name,
        &spec.language,
        &default_accent,
    ));
    for _ in 0..spec.sessions {
        let session_id = random_id(&mut rng, 9);
        let noise = *spec
            .noise
            .choose(&mut rng)
            .unwrap_or(&NoiseBackground::Clean);
        let n_topics = rng.gen_range(1..=spec.topics.len().clamp(1, 3));
        let session_topics: Vec<String> = spec
            .topics
            .iter()
            .cloned()
            .choose_multiple(&mut rng, n_topics);
        let accent = spec
            .accents
            .choose(&mut rng)
            .cloned()
            .unwrap_or_else(|| default_accent.clone());
        let n_speakers = rng.gen_range(1..=spec.max_speakers_per_session.max(1));
        let mut local: Vec<usize> = (0..speakers.len())
            .filter(|&i| speakers[i].accent == accent)
            .choose_multiple(&mut rng, n_speakers);
        let n_utts = rng.gen_range(
            spec.utterances_per_session.0
                ..=spec
                    .utterances_per_session
                    .1
                    .max(spec.utterances_per_session.0),
        );
        let mut utterance_ids = Vec::new();
        let mut speech_seconds = 0.0;
        for j in 0..n_utts {
            let duration = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let duration = (duration * 100.0).round() / 100.0;
            let room: Vec<usize> = local
                .iter()
                .copied()
                .filter(|&i| speaker_seconds[i] + duration < SPEAKER_BUDGET_SECONDS)
                .collect();
            let sp = match room.choose(&mut rng) {
                Some(&i) => i,
                None => {
                    let i = new_speaker(&mut rng, &mut speakers, &mut speaker_seconds, &accent);
                    local.push(i);
                    i
                }
            };
            let k = rng.gen_range(1..=spec.max_topics_per_utterance.clamp(1, session_topics.len()));
            let mut topics: Vec<String> =
                session_topics.iter().cloned().choose_multiple(&mut rng, k);
            topics.sort_by_key(|t| session_topics.iter().position(|s| s == t));
            let utterance_id = format!("{session_id}-{j}");
            speaker_seconds[sp] += duration;
            speech_seconds += duration;
            let speaker = &mut speakers[sp];
            speaker.utterance_ids_list.push(utterance_id.clone());
            if !speaker.context_ids_list.contains(&session_id) {
                speaker.context_ids_list.push(session_id.clone());
            }
            utterance_ids.push(utterance_id.clone());
            corpus.utterances.insert(
                utterance_id.clone(),
                UtteranceRecord {
                    utterance_id: utterance_id.clone(),
                    speaker_id: speaker.speaker_id.clone(),
                    session_id: session_id.clone(),
                    audio_path: format!("/audio-utterance/{session_id}/{utterance_id}.wav"),
                    duration_in_seconds: duration,
                    domains: vec![topics[0].clone()],
                    topics,
                    transcription: sentence(&mut rng),
                    language: spec.language.clone(),
                    accent: accent.clone(),
                    gender: speaker.gender.clone(),
                    noise_background: noise,
                    sampling_rate: SAMPLING_RATE,
                    sampling_bit: SAMPLING_BIT,
                    extra: BTreeMap::new(),
                },
            );
        }
        let mut session_speakers: Vec<String> = Vec::new();
        for u in utterance_ids.iter().map(|id| &corpus.utterances[id]) {
            if !session_speakers.contains(&u.speaker_id) {
                session_speakers.push(u.speaker_id.clone());
            }
        }
        let title: Vec<&str> = session_topics.iter().map(String::as_str).collect();
        corpus.sessions.insert(
            session_id.clone(),
            SessionRecord {
                session_id: session_id.clone(),
                audio_path: format!("/audio-session/{session_id}.wav"),
                duration_in_minutes: ((speech_seconds * rng.gen_range(1.05..1.4) / 60.0) * 1000.0)
                    .ceil()
                    / 1000.0,
                utterance_ids_list: utterance_ids,
                speakers: session_speakers,
                session_brief_title: title.join(" "),
                domains: vec![session_topics[0].clone()],
                topics: session_topics,
                language: spec.language.clone(),
                accent,
                noise_background: noise,
                sampling_rate: SAMPLING_RATE,
                sampling_bit: SAMPLING_BIT,
                extra: BTreeMap::new(),
            },
        );
    }
    for (sp, secs) in speakers.into_iter().zip(speaker_seconds) {
        if sp.utterance_ids_list.is_empty() {
            continue;
        }
        let mut sp = sp;
        sp.duration_in_minutes = secs / 60.0;
        corpus.speakers.insert(sp.speaker_id.clone(), sp);
    }
    corpus.manifest = aggregate_stats(&corpus)?;
    Ok(corpus)
}
