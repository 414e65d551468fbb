use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::adapters::{AdapterError, AdapterSet, StageRequest};
use super::cut::{cut_utterances, Pause, SpeechRun};
use super::decide::{detect_topics, gate_prelabels, route_language};
use super::{
    GatingPolicy, PretagBundle, PretagError, Provenance, RawSessionInput, Routing, SegmentKind,
    SegmentLabel, SpeakerTurn, Stage, StagePayload, StageResult, TimedWord, UtteranceDraft,
};
use crate::corpus::{TopicVocabulary, MAX_UTTERANCE_SECONDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub supported_languages: BTreeSet<String>,
    /// Minimum silence between speech segments that counts as a pause.
    pub pause_threshold: f64,
    /// Gaps at least this long always end an utterance.
    pub max_bridge_gap: f64,
    pub max_utterance_seconds: f64,
    pub vocabulary: TopicVocabulary,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            supported_languages: ["english".to_string()].into(),
            pause_threshold: 0.3,
            max_bridge_gap: 2.0,
            max_utterance_seconds: MAX_UTTERANCE_SECONDS,
            vocabulary: TopicVocabulary::default(),
        }
    }
}

struct Runner<'a> {
    input: &'a RawSessionInput,
    adapters: &'a AdapterSet,
    provenance: Vec<Provenance>,
}

impl Runner<'_> {
    fn call(
        &mut self,
        stage: Stage,
        regions: Vec<(f64, f64)>,
    ) -> Result<Option<StageResult>, PretagError> {
        let Some(adapter) = self.adapters.get(stage) else {
            if AdapterSet::MANDATORY.contains(&stage) {
                return Err(PretagError::MissingAdapter(stage));
            }
            return Ok(None);
        };
        let request = StageRequest {
            stage,
            session_id: self.input.session_id.clone(),
            audio_path: self.input.audio_path.clone(),
            regions,
        };
        let result = match adapter.run(&request) {
            Ok(r) => r,
            Err(AdapterError::NotApplicable) if !AdapterSet::MANDATORY.contains(&stage) => {
                return Ok(None)
            }
            Err(e) => {
                return Err(PretagError::AdapterFailure {
                    stage,
                    cause: e.to_string(),
                })
            }
        };
        if result.payload.stage() != stage || result.stage != stage {
            return Err(PretagError::PayloadMismatch {
                stage,
                found: result.payload.stage(),
            });
        }
        if !(0.0..=1.0).contains(&result.confidence) {
            return Err(PretagError::InvalidConfidence {
                stage,
                value: result.confidence,
            });
        }
        self.provenance.push(result.provenance.clone());
        Ok(Some(result))
    }

    fn require(
        &mut self,
        stage: Stage,
        regions: Vec<(f64, f64)>,
    ) -> Result<StageResult, PretagError> {
        self.call(stage, regions)?
            .ok_or(PretagError::MissingAdapter(stage))
    }
}

fn check_segments(segments: &[SegmentLabel]) -> Result<(), PretagError> {
    let mut by_kind: BTreeMap<SegmentKind, Vec<&SegmentLabel>> = BTreeMap::new();
    for s in segments {
        if s.start.is_nan() || s.end.is_nan() || s.start >= s.end || s.start < 0.0 {
            return Err(PretagError::InvalidSegments(format!(
                "segment [{}, {}]",
                s.start, s.end
            )));
        }
        by_kind.entry(s.kind).or_default().push(s);
    }
    for (kind, mut segs) in by_kind {
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        if let Some(w) = segs.windows(2).find(|w| w[1].start < w[0].end) {
            return Err(PretagError::InvalidSegments(format!(
                "{kind:?} segments overlap at {}",
                w[1].start
            )));
        }
    }
    Ok(())
}

/// Speech segments intersected with speaker turns, merged into per-speaker
/// runs. Gaps of at least `pause_threshold` inside a run become pauses.
fn speech_runs(
    segments: &[SegmentLabel],
    turns: &[SpeakerTurn],
    config: &PipelineConfig,
) -> (Vec<SpeechRun>, Vec<Pause>, Vec<SegmentLabel>) {
    let mut speech: Vec<&SegmentLabel> = segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Speech)
        .collect();
    speech.sort_by(|a, b| a.start.total_cmp(&b.start));
    let non_speech: Vec<&SegmentLabel> = segments
        .iter()
        .filter(|s| s.kind != SegmentKind::Speech)
        .collect();

    let mut pieces: Vec<SpeechRun> = Vec::new();
    for s in speech {
        for t in turns {
            let start = s.start.max(t.start);
            let end = s.end.min(t.end);
            if start < end {
                pieces.push(SpeechRun {
                    start,
                    end,
                    speaker: t.speaker.clone(),
                });
            }
        }
    }
    pieces.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.speaker.cmp(&b.speaker)));
    // overlapped speech: the later piece yields
    let mut trimmed: Vec<SpeechRun> = Vec::new();
    for mut p in pieces {
        if let Some(last) = trimmed.last() {
            if p.start < last.end {
                p.start = last.end;
            }
        }
        if p.start < p.end {
            trimmed.push(p);
        }
    }

    let labeled: Vec<SegmentLabel> = trimmed
        .iter()
        .map(|p| SegmentLabel {
            start: p.start,
            end: p.end,
            kind: SegmentKind::Speech,
            speaker_local_id: Some(p.speaker.clone()),
        })
        .collect();

    let mut runs: Vec<SpeechRun> = Vec::new();
    let mut pauses = Vec::new();
    for p in trimmed {
        if let Some(run) = runs.last_mut() {
            let gap = p.start - run.end;
            let blocked = non_speech
                .iter()
                .any(|n| n.start < p.start && n.end > run.end);
            if run.speaker == p.speaker && gap < config.max_bridge_gap && !blocked {
                if gap >= config.pause_threshold {
                    pauses.push(Pause {
                        start: run.end,
                        end: p.start,
                    });
                }
                run.end = p.end;
                continue;
            }
        }
        runs.push(p);
    }
    (runs, pauses, labeled)
}

fn assign_words(words: &[TimedWord], start: f64, end: f64) -> String {
    words
        .iter()
        .filter(|w| {
            let mid = 0.5 * (w.start + w.end);
            mid >= start && mid < end
        })
        .map(|w| w.word.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Runs every stage for one session in pipeline order.
///
/// A spoofed or unsupported-language session short-circuits into a rejected
/// bundle; later stages are never invoked for it. Adapter failures surface as
/// [`PretagError::AdapterFailure`] so the caller can park the session.
pub fn run_pipeline(
    input: &RawSessionInput,
    adapters: &AdapterSet,
    policy: &GatingPolicy,
    config: &PipelineConfig,
) -> Result<PretagBundle, PretagError> {
    if !policy.is_valid() {
        return Err(PretagError::InvalidPolicy);
    }
    if let Some(stage) = adapters.missing_mandatory() {
        return Err(PretagError::MissingAdapter(stage));
    }
    let mut runner = Runner {
        input,
        adapters,
        provenance: Vec::new(),
    };

    let source_separated = match runner.call(Stage::SourceSeparation, Vec::new())? {
        Some(StageResult {
            payload: StagePayload::SourceSeparation { applied },
            ..
        }) => applied,
        _ => false,
    };

    let synthetic = runner.require(Stage::SyntheticDetection, Vec::new())?;
    if let StagePayload::SyntheticDetection { spoofed: true } = synthetic.payload {
        return Ok(PretagBundle::rejected(
            &input.session_id,
            Routing::RejectedSynthetic,
            runner.provenance,
        ));
    }

    let language = runner.require(Stage::LanguageID, Vec::new())?;
    let route = route_language(&language, &config.supported_languages)?;
    let Routing::Accepted { language, .. } = route.routing else {
        let mut bundle =
            PretagBundle::rejected(&input.session_id, route.routing, runner.provenance);
        bundle.language_confidence = Some(route.confidence);
        return Ok(bundle);
    };

    // an accent failure leaves the accent blank
    let accent = match runner.call(Stage::AccentID, Vec::new()) {
        Ok(Some(StageResult {
            payload: StagePayload::AccentId { accent },
            ..
        })) => accent,
        _ => None,
    };

    let StagePayload::SpeechSegmentation { segments } = runner
        .require(Stage::SpeechSegmentation, Vec::new())?
        .payload
    else {
        unreachable!("payload checked against stage");
    };
    check_segments(&segments)?;

    let StagePayload::SpeakerSegmentation { turns } = runner
        .require(Stage::SpeakerSegmentation, Vec::new())?
        .payload
    else {
        unreachable!("payload checked against stage");
    };

    let (runs, pauses, speech_labels) = speech_runs(&segments, &turns, config);
    let cut = cut_utterances(&runs, &pauses, config.max_utterance_seconds)?;

    let genders = match runner.call(Stage::GenderDetection, Vec::new())? {
        Some(StageResult {
            payload: StagePayload::GenderDetection { genders },
            ..
        }) => genders,
        _ => BTreeMap::new(),
    };

    let regions: Vec<(f64, f64)> = cut.bounds.iter().map(|b| (b.start, b.end)).collect();
    let asr = runner.require(Stage::ASR, regions)?;
    let StagePayload::Asr { words, wer } = &asr.payload else {
        unreachable!("payload checked against stage");
    };
    let asr_confidence = match wer {
        Some(w) => (1.0 - w).clamp(0.0, 1.0),
        None => asr.confidence,
    };

    let drafts: Vec<UtteranceDraft> = cut
        .bounds
        .iter()
        .map(|b| UtteranceDraft {
            start: b.start,
            end: b.end,
            speaker_local_id: b.speaker.clone(),
            transcript: assign_words(words, b.start, b.end),
            asr_confidence,
        })
        .collect();

    let tagged: Vec<String> = {
        let mut cats: Vec<&str> = input
            .tags
            .iter()
            .filter_map(|t| config.vocabulary.category_of(t))
            .collect();
        let order: Vec<&str> = config.vocabulary.category_names().collect();
        cats.sort_by_key(|c| order.iter().position(|o| o == c));
        cats.dedup();
        cats.into_iter().map(str::to_string).collect()
    };
    let topics = if !tagged.is_empty() {
        tagged
    } else if let Some(StageResult {
        payload: StagePayload::TopicDetection { topics },
        ..
    }) = runner.call(Stage::TopicDetection, Vec::new())?
    {
        topics
    } else {
        let transcript = words
            .iter()
            .map(|w| w.word.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        detect_topics(&transcript, &config.vocabulary)
    };

    let mut all_segments: Vec<SegmentLabel> = segments
        .iter()
        .filter(|s| s.kind != SegmentKind::Speech)
        .cloned()
        .chain(speech_labels)
        .collect();
    all_segments.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.kind.cmp(&b.kind)));

    Ok(PretagBundle {
        session_id: input.session_id.clone(),
        routing: Routing::Accepted { language, accent },
        language_confidence: Some(route.confidence),
        source_separated,
        segments: all_segments,
        drafts,
        genders,
        topics,
        prelabel_mode: gate_prelabels(asr_confidence, policy),
        uncuttable: cut.uncuttable,
        provenance: runner.provenance,
    })
}

/// Runs independent sessions on `workers` threads; per-session stage order is
/// sequential. Results come back in input order.
pub fn run_batch(
    inputs: &[RawSessionInput],
    adapters: &AdapterSet,
    policy: &GatingPolicy,
    config: &PipelineConfig,
    workers: usize,
) -> Vec<Result<PretagBundle, PretagError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<PretagBundle, PretagError>>>> =
        Mutex::new((0..inputs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= inputs.len() {
                    break;
                }
                let r = run_pipeline(&inputs[i], adapters, policy, config);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
