//! Scripted fixture sessions whose expected bundles are written down by hand
//! from the script, not derived from the pipeline.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::pretag::{
    FixtureFile, PrelabelMode, PretagBundle, Provenance, RawSessionInput, Routing, SampleFormat,
    SegmentKind, SegmentLabel, SpeakerTurn, Stage, StagePayload, StageResult, TimedWord,
    UtteranceDraft,
};

pub struct Scripted {
    pub input: RawSessionInput,
    pub fixture: FixtureFile,
    pub expected: PretagBundle,
    /// Stages the pipeline should call, in order.
    pub calls: Vec<Stage>,
}

fn push(
    stages: &mut BTreeMap<Stage, StageResult>,
    provenance: &mut Vec<Provenance>,
    r: StageResult,
) {
    provenance.push(r.provenance.clone());
    stages.insert(r.stage, r);
}

fn result(payload: StagePayload, confidence: f64) -> StageResult {
    StageResult::new(payload, confidence, "fixture")
}

pub fn scripted_session(i: usize, seed: u64) -> Scripted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003) + i as u64);
    let session_id = format!("fx{i:03}");
    let mut stages = BTreeMap::new();
    let mut provenance = Vec::new();

    let separated = rng.gen_bool(0.5);
    let has_separation = rng.gen_bool(0.7);
    if has_separation {
        push(
            &mut stages,
            &mut provenance,
            result(StagePayload::SourceSeparation { applied: separated }, 1.0),
        );
    }
    let fate = rng.gen_range(0..10);
    let spoofed = fate == 0;
    push(
        &mut stages,
        &mut provenance,
        result(StagePayload::SyntheticDetection { spoofed }, 0.99),
    );
    let language = if fate == 1 { "Tagalog" } else { "English" };
    let lang_conf = rng.gen_range(0.8..1.0);
    let mut tags = Vec::new();
    let mut expected_topics = Vec::new();

    // Speech: m segments, one speaker each, separated by long gaps.
    let m = rng.gen_range(1..=5);
    let mut t = rng.gen_range(0.0..2.0);
    let mut segments = Vec::new();
    let mut turns = Vec::new();
    let mut words = Vec::new();
    let mut drafts = Vec::new();
    let mut labels = Vec::new();
    let asr_conf = rng.gen_range(0.5..1.0);
    let wer = rng.gen_bool(0.3).then(|| rng.gen_range(0.0..0.4));
    let effective = wer.map_or(asr_conf, |w| 1.0 - w);
    for k in 0..m {
        let len = rng.gen_range(1.0..19.5);
        let speaker = format!("S{}", rng.gen_range(0..3));
        segments.push(SegmentLabel {
            start: t,
            end: t + len,
            kind: SegmentKind::Speech,
            speaker_local_id: None,
        });
        turns.push(SpeakerTurn {
            start: t,
            end: t + len,
            speaker: speaker.clone(),
        });
        labels.push(SegmentLabel {
            start: t,
            end: t + len,
            kind: SegmentKind::Speech,
            speaker_local_id: Some(speaker.clone()),
        });
        let n_words = (len as usize).max(1);
        let mut text = Vec::new();
        for w in 0..n_words {
            let ws = t + len * w as f64 / n_words as f64;
            let word = format!("blorp{k}{w}");
            words.push(TimedWord {
                start: ws,
                end: ws + len / n_words as f64 * 0.8,
                word: word.clone(),
            });
            text.push(word);
        }
        drafts.push(UtteranceDraft {
            start: t,
            end: t + len,
            speaker_local_id: speaker,
            transcript: text.join(" "),
            asr_confidence: effective,
        });
        let gap = rng.gen_range(2.5..6.0);
        if rng.gen_bool(0.5) {
            let music = SegmentLabel {
                start: t + len + 0.5,
                end: t + len + gap - 0.5,
                kind: SegmentKind::Music,
                speaker_local_id: None,
            };
            segments.push(music.clone());
            labels.push(music);
        }
        t += len + gap;
    }

    let accent = rng.gen_bool(0.6).then(|| "en-us".to_string());
    let genders: BTreeMap<String, String> = if rng.gen_bool(0.8) {
        drafts
            .iter()
            .map(|d| {
                (
                    d.speaker_local_id.clone(),
                    if rng.gen_bool(0.5) { "female" } else { "male" }.into(),
                )
            })
            .collect()
    } else {
        BTreeMap::new()
    };
    let topic_mode = rng.gen_range(0..3);

    let routing = if spoofed {
        Some(Routing::RejectedSynthetic)
    } else {
        push(
            &mut stages,
            &mut provenance,
            result(
                StagePayload::LanguageId {
                    language: language.into(),
                },
                lang_conf,
            ),
        );
        if language != "English" {
            Some(Routing::RejectedUnsupportedLanguage {
                language: language.to_lowercase(),
            })
        } else {
            None
        }
    };

    // Later stages are in the fixture either way; rejected sessions must not
    // reach them.
    let later_start = provenance.len();
    if accent.is_some() {
        push(
            &mut stages,
            &mut provenance,
            result(
                StagePayload::AccentId {
                    accent: accent.clone(),
                },
                0.9,
            ),
        );
    }
    push(
        &mut stages,
        &mut provenance,
        result(StagePayload::SpeechSegmentation { segments }, 0.95),
    );
    push(
        &mut stages,
        &mut provenance,
        result(StagePayload::SpeakerSegmentation { turns }, 0.95),
    );
    if !genders.is_empty() {
        push(
            &mut stages,
            &mut provenance,
            result(
                StagePayload::GenderDetection {
                    genders: genders.clone(),
                },
                0.9,
            ),
        );
    }
    push(
        &mut stages,
        &mut provenance,
        result(StagePayload::Asr { words, wer }, asr_conf),
    );
    match topic_mode {
        0 => {
            tags.push("sports".to_string());
            expected_topics.push("sports".to_string());
            stages.insert(
                Stage::TopicDetection,
                result(
                    StagePayload::TopicDetection {
                        topics: vec!["weather".into()],
                    },
                    0.5,
                ),
            );
        }
        1 => {
            expected_topics = vec!["news".into(), "weather".into()];
            push(
                &mut stages,
                &mut provenance,
                result(
                    StagePayload::TopicDetection {
                        topics: expected_topics.clone(),
                    },
                    0.5,
                ),
            );
        }
        _ => {}
    }

    let input = RawSessionInput {
        session_id: session_id.clone(),
        audio_path: format!("/raw/{session_id}.wav"),
        title: None,
        tags,
        sample_format: SampleFormat::default(),
    };
    let fixture = FixtureFile {
        session_id: session_id.clone(),
        stages,
    };

    let calls: Vec<Stage> = match &routing {
        Some(Routing::RejectedSynthetic) => Stage::ORDER[..2].to_vec(),
        Some(_) => Stage::ORDER[..3].to_vec(),
        None if topic_mode == 0 => Stage::ORDER[..8].to_vec(),
        None => Stage::ORDER.to_vec(),
    };
    let expected = match routing {
        Some(r) => {
            provenance.truncate(later_start);
            let mut b = PretagBundle::rejected(&session_id, r.clone(), provenance);
            if matches!(r, Routing::RejectedUnsupportedLanguage { .. }) {
                b.language_confidence = Some(lang_conf);
            }
            b
        }
        None => {
            labels.sort_by(|a, b| a.start.total_cmp(&b.start));
            PretagBundle {
                session_id: session_id.clone(),
                routing: Routing::Accepted {
                    language: "english".into(),
                    accent,
                },
                language_confidence: Some(lang_conf),
                source_separated: has_separation && separated,
                segments: labels,
                drafts,
                genders,
                topics: expected_topics,
                prelabel_mode: if effective >= 0.85 {
                    PrelabelMode::Assisted
                } else {
                    PrelabelMode::FromScratch
                },
                uncuttable: Vec::new(),
                provenance,
            }
        }
    };
    Scripted {
        input,
        fixture,
        expected,
        calls,
    }
}
