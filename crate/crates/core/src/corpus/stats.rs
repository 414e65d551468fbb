use std::collections::{BTreeMap, BTreeSet};

use super::{Corpus, CorpusError, DatasetManifest, SAMPLING_BIT, SAMPLING_RATE};

/// Recomputes the dataset-level manifest from utterance records.
///
/// Identity fields (name, language, accent, unknown extras) are carried over
/// from the corpus' current manifest; everything numeric is recomputed. An
/// utterance contributes its hours to every topic it lists.
pub fn aggregate_stats(corpus: &Corpus) -> Result<DatasetManifest, CorpusError> {
    let mut total_seconds = 0.0;
    let mut topic_seconds: BTreeMap<String, f64> = BTreeMap::new();
    let mut topic_speakers: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    let mut gender_seconds: BTreeMap<String, f64> = BTreeMap::new();
    let mut noise_seconds: BTreeMap<String, f64> = BTreeMap::new();
    let mut speaker_gender: BTreeMap<&str, &str> = BTreeMap::new();

    for u in corpus.utterances.values() {
        let secs = u.duration_in_seconds;
        total_seconds += secs;
        let mut seen = BTreeSet::new();
        for t in u.topics.iter() {
            // a topic listed twice on one utterance still counts once
            if seen.insert(t.as_str()) {
                *topic_seconds.entry(t.clone()).or_default() += secs;
                topic_speakers
                    .entry(t.clone())
                    .or_default()
                    .insert(&u.speaker_id);
            }
        }
        *gender_seconds.entry(u.gender.clone()).or_default() += secs;
        *noise_seconds
            .entry(u.noise_background.to_string())
            .or_default() += secs;
        match speaker_gender.get(u.speaker_id.as_str()) {
            Some(g) if *g != u.gender => {
                return Err(CorpusError::InconsistentGender(u.speaker_id.clone()))
            }
            Some(_) => {}
            None => {
                speaker_gender.insert(&u.speaker_id, &u.gender);
            }
        }
    }

    let mut gender_speakers: BTreeMap<String, u64> = BTreeMap::new();
    for g in speaker_gender.values() {
        *gender_speakers.entry(g.to_string()).or_default() += 1;
    }

    let to_hours = |m: BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        m.into_iter().map(|(k, s)| (k, s / 3600.0)).collect()
    };

    let base = &corpus.manifest;
    Ok(DatasetManifest {
        speechdb_name: base.speechdb_name.clone(),
        language: base.language.clone(),
        accent: base.accent.clone(),
        duration_in_hours: total_seconds / 3600.0,
        speakers_cnt: speaker_gender.len() as u64,
        utterances_cnt: corpus.utterances.len() as u64,
        topics_by_hours: to_hours(topic_seconds),
        topics_by_speakers: topic_speakers
            .into_iter()
            .map(|(k, v)| (k, v.len() as u64))
            .collect(),
        gender_dist_by_hours: to_hours(gender_seconds),
        gender_dist_by_speakers: gender_speakers,
        noisetype_dist_by_hours: to_hours(noise_seconds),
        sampling_rate: SAMPLING_RATE,
        sampling_bit: SAMPLING_BIT,
        audio_channels: 1,
        extra: base.extra.clone(),
    })
}
