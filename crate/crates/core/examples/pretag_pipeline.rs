//! Pre-tag one session from fixture stage results: routing, segmentation,
//! ASR drafts and the assisted/from-scratch gate.
//!
//! ```bash
//! cargo run --example pretag_pipeline
//! ```

use std::collections::BTreeMap;

use anyhow::Result;
use speech_hitl::pretag::{
    gate_prelabels, run_pipeline, CallLog, FixtureFile, FixtureStore, GatingPolicy, PipelineConfig,
    RawSessionInput, SampleFormat, SegmentKind, SegmentLabel, SpeakerTurn, Stage, StagePayload,
    StageResult, TimedWord,
};

fn words(start: f64, text: &str) -> Vec<TimedWord> {
    text.split(' ')
        .enumerate()
        .map(|(i, w)| TimedWord {
            start: start + i as f64 * 0.5,
            end: start + i as f64 * 0.5 + 0.4,
            word: w.to_string(),
        })
        .collect()
}

fn speech(start: f64, end: f64) -> SegmentLabel {
    SegmentLabel {
        start,
        end,
        kind: SegmentKind::Speech,
        speaker_local_id: None,
    }
}

fn main() -> Result<()> {
    let input = RawSessionInput {
        session_id: "radio0001".into(),
        audio_path: "/raw/radio0001.wav".into(),
        title: Some("evening match report".into()),
        tags: Vec::new(),
        sample_format: SampleFormat::default(),
    };

    let mut asr_words = words(0.5, "the home side scored twice before the break");
    asr_words.extend(words(9.0, "rain is expected across the coast tomorrow"));
    let results = [
        StagePayload::SourceSeparation { applied: false },
        StagePayload::SyntheticDetection { spoofed: false },
        StagePayload::LanguageId {
            language: "English".into(),
        },
        StagePayload::SpeechSegmentation {
            segments: vec![speech(0.5, 5.0), speech(9.0, 13.0)],
        },
        StagePayload::SpeakerSegmentation {
            turns: vec![
                SpeakerTurn {
                    start: 0.5,
                    end: 5.0,
                    speaker: "S0".into(),
                },
                SpeakerTurn {
                    start: 9.0,
                    end: 13.0,
                    speaker: "S1".into(),
                },
            ],
        },
        StagePayload::GenderDetection {
            genders: BTreeMap::from([("S0".into(), "female".into()), ("S1".into(), "male".into())]),
        },
        StagePayload::Asr {
            words: asr_words,
            wer: Some(0.08),
        },
    ];
    let mut fixture = FixtureFile {
        session_id: input.session_id.clone(),
        stages: BTreeMap::new(),
    };
    for payload in results {
        let r = StageResult::new(payload, 0.92, "fixture");
        fixture.stages.insert(r.stage, r);
    }

    let dir = tempfile::tempdir()?;
    fixture.write(dir.path())?;
    let log = CallLog::default();
    let adapters = FixtureStore::new(dir.path()).adapter_set().logged(&log);

    let bundle = run_pipeline(
        &input,
        &adapters,
        &GatingPolicy::default(),
        &PipelineConfig::default(),
    )?;
    let called: Vec<Stage> = log.calls().into_iter().map(|(s, _)| s).collect();
    println!("stages called: {called:?}");
    println!("routing: {:?}", bundle.routing);
    println!("topics: {:?}", bundle.topics);
    println!("mode: {:?}", bundle.prelabel_mode);
    for d in &bundle.drafts {
        println!(
            "  [{:5.1}-{:5.1}] {} {}",
            d.start, d.end, d.speaker_local_id, d.transcript
        );
    }

    for confidence in [0.65, 0.75, 0.85, 0.95] {
        println!(
            "gate({confidence}) = {:?}",
            gate_prelabels(confidence, &GatingPolicy::default())
        );
    }
    Ok(())
}
