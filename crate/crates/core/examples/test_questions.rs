//! Hide test questions in an assignment, score the annotator on them, and
//! recycle their work once the score drops below the removal threshold.
//!
//! ```bash
//! cargo run --example test_questions
//! ```

use std::collections::BTreeSet;

use anyhow::Result;
use speech_hitl::qc::{
    build_assignment, judge_answer, recycle_units, update_score_and_enforce, AcceptedAnswer,
    AnnotatorProfile, AnswerKind, JudgePolicy, RemovalPolicy, TestQuestion, WorkItemPayload,
};

fn payload(path: &str, prelabel: &str) -> WorkItemPayload {
    WorkItemPayload {
        kind: AnswerKind::Transcription,
        audio_path: path.into(),
        duration_seconds: 6.0,
        prelabel: Some(prelabel.into()),
    }
}

fn main() -> Result<()> {
    let units: Vec<_> = (0..10)
        .map(|i| {
            (
                format!("u{i}"),
                payload(&format!("/clips/u{i}.wav"), "draft text"),
            )
        })
        .collect();
    let pool: Vec<_> = (0..4)
        .map(|j| TestQuestion {
            tq_id: format!("tq{j}"),
            payload: payload(&format!("/clips/c{j:03}.wav"), "turn left at the bridge"),
            ground_truth: "turn left at the bridge".into(),
            verified_by: "lead".into(),
        })
        .collect();

    let a = build_assignment("a1", "ann7", &units, &pool, 2, &BTreeSet::new(), 11)?;
    let view = serde_json::to_string(&a.annotator_view())?;
    println!(
        "annotator sees {} slots; view names a TQ: {}",
        a.items.len(),
        view.contains("tq")
    );
    for item in a.items.iter().filter(|i| i.is_tq()) {
        println!("  slot {} hides {:?}", item.slot_index, item.item);
    }

    // The annotator gets one TQ within tolerance and one badly wrong.
    let policy = JudgePolicy { wer_tolerance: 0.1 };
    let judged: Vec<bool> = ["turn left at the bridge", "turn right near a church"]
        .iter()
        .map(|answer| {
            judge_answer(
                AnswerKind::Transcription,
                answer,
                "turn left at the bridge",
                &policy,
            )
        })
        .collect();
    println!("judgments: {judged:?}");

    let rules = RemovalPolicy::default();
    let mut profile = AnnotatorProfile::new("ann7", "en-us");
    for round in 1..=3 {
        let (next, actions) = update_score_and_enforce(&profile, &judged, &rules);
        profile = next;
        println!(
            "round {round}: score {:.2} over {} attempts, status {:?}, actions {actions:?}",
            profile.quality_score, profile.tq_attempted, profile.status
        );
    }

    // u0 was only ever done by ann7; u1 also has an answer from someone in good standing.
    let answers = vec![
        AcceptedAnswer {
            unit_id: "u0".into(),
            annotator_id: "ann7".into(),
            seq: 1,
        },
        AcceptedAnswer {
            unit_id: "u1".into(),
            annotator_id: "ann7".into(),
            seq: 2,
        },
        AcceptedAnswer {
            unit_id: "u1".into(),
            annotator_id: "ann2".into(),
            seq: 3,
        },
    ];
    let requeue = recycle_units("ann7", &answers, |id| id != "ann7");
    println!("requeued: {requeue:?}");
    Ok(())
}
