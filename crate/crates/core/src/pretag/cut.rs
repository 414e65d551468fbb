//! Cutting speaker-homogeneous speech into utterances of bounded length.

use serde::{Deserialize, Serialize};

use super::PretagError;

/// A stretch of speech attributed to one local speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechRun {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
}

/// A silence inside a run where a cut is allowed. May have zero length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pause {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceBound {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
}

impl UtteranceBound {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A pause-free stretch longer than the cap that had to be hard-cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uncuttable {
    pub start: f64,
    pub end: f64,
    pub speaker: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutOutcome {
    pub bounds: Vec<UtteranceBound>,
    pub uncuttable: Vec<Uncuttable>,
}

/// Cuts runs into utterances no longer than `max_seconds`.
///
/// Cuts are placed only at pauses and at run (speaker) boundaries, using as
/// few utterances as possible: each utterance extends over as many pause-free
/// pieces as fit. Pauses at a cut are dropped from both neighbours. A
/// pause-free piece longer than the cap is split every `max_seconds` and
/// reported as [`Uncuttable`].
pub fn cut_utterances(
    runs: &[SpeechRun],
    pauses: &[Pause],
    max_seconds: f64,
) -> Result<CutOutcome, PretagError> {
    for w in runs.windows(2) {
        if w[1].start < w[0].end {
            return Err(PretagError::InvalidSegments(format!(
                "runs overlap or are unsorted at {}",
                w[1].start
            )));
        }
    }
    if let Some(r) = runs
        .iter()
        .find(|r| r.start.is_nan() || r.end.is_nan() || r.start >= r.end)
    {
        return Err(PretagError::InvalidSegments(format!(
            "empty run [{}, {}]",
            r.start, r.end
        )));
    }
    let mut sorted_pauses = pauses.to_vec();
    sorted_pauses.sort_by(|a, b| a.start.total_cmp(&b.start));

    let mut out = CutOutcome::default();
    for run in runs {
        let mut pieces = Vec::new();
        let mut cursor = run.start;
        for p in sorted_pauses.iter() {
            if p.start < run.start || p.end > run.end || p.start < cursor {
                continue;
            }
            if p.start > cursor {
                pieces.push((cursor, p.start));
            }
            cursor = p.end;
        }
        if run.end > cursor {
            pieces.push((cursor, run.end));
        }

        let mut atoms = Vec::new();
        for (s, e) in pieces {
            if e - s > max_seconds {
                out.uncuttable.push(Uncuttable {
                    start: s,
                    end: e,
                    speaker: run.speaker.clone(),
                });
                let mut t = s;
                while e - t > max_seconds {
                    atoms.push((t, t + max_seconds));
                    t += max_seconds;
                }
                atoms.push((t, e));
            } else {
                atoms.push((s, e));
            }
        }

        let mut group: Option<(f64, f64)> = None;
        for (s, e) in atoms {
            group = match group {
                Some((gs, _)) if e - gs <= max_seconds => Some((gs, e)),
                Some((gs, ge)) => {
                    out.bounds.push(UtteranceBound {
                        start: gs,
                        end: ge,
                        speaker: run.speaker.clone(),
                    });
                    Some((s, e))
                }
                None => Some((s, e)),
            };
        }
        if let Some((gs, ge)) = group {
            out.bounds.push(UtteranceBound {
                start: gs,
                end: ge,
                speaker: run.speaker.clone(),
            });
        }
    }
    Ok(out)
}
