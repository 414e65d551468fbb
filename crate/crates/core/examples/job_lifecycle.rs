//! Drive one annotation job end to end against the service: lease, submit,
//! audit, finalize. Two careful annotators and one who guesses.
//!
//! ```bash
//! cargo run --example job_lifecycle
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::orchestrator::{
    JobRequest, ManualClock, Orchestrator, OrchestratorError, ServiceConfig, SlotAnswer,
    SubmitRequest, UnitSpec, WorkUnit,
};
use speech_hitl::qc::{AnswerKind, QcPolicy, TestQuestion, WorkItemPayload};

fn clip(path: String, prelabel: &str) -> WorkItemPayload {
    WorkItemPayload {
        kind: AnswerKind::Transcription,
        audio_path: path,
        duration_seconds: 5.0,
        prelabel: Some(prelabel.to_string()),
    }
}

fn main() -> Result<()> {
    let truth = |i: usize| format!("caller {i} asks about the weekend forecast");
    let mut audio_truth: BTreeMap<String, String> = BTreeMap::new();
    let units: Vec<UnitSpec> = (0..120)
        .map(|i| {
            let path = format!("/clips/u{i}.wav");
            audio_truth.insert(path.clone(), truth(i));
            UnitSpec {
                unit_id: format!("u{i:03}"),
                session_id: "call-17".into(),
                payload: clip(path, &truth(i)),
                prelabel_mode: None,
                locale: None,
            }
        })
        .collect();
    let tq_pool: Vec<TestQuestion> = (0..200)
        .map(|j| {
            let path = format!("/clips/g{j}.wav");
            let text = format!("reference line {j} about tides");
            audio_truth.insert(path.clone(), text.clone());
            TestQuestion {
                tq_id: format!("g{j}"),
                payload: clip(path, &text),
                ground_truth: text,
                verified_by: "lead".into(),
            }
        })
        .collect();

    let clock = Arc::new(ManualClock::new(1_700_000_000_000));
    let o = Orchestrator::ephemeral(ServiceConfig::default(), clock.clone());
    for a in ["alice", "bo", "guesser"] {
        o.set_qualification(a, "en-us", true)?;
    }
    let job = o.create_job(JobRequest {
        job_id: Some("forecast-calls".into()),
        locale: "en-us".into(),
        guideline_version: "v3".into(),
        policy: QcPolicy::default(),
        tq_pool,
        sessions: Vec::new(),
        units,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let accuracy = [("alice", 0.99), ("bo", 0.97), ("guesser", 0.3)];
    'work: loop {
        for (who, p) in accuracy {
            let a = match o.next_assignment(who, &job) {
                Ok(a) => a,
                Err(OrchestratorError::AnnotatorRemoved(_)) => continue,
                Err(OrchestratorError::NoWork(_)) => break 'work,
                Err(e) => return Err(e.into()),
            };
            // The annotator only sees audio paths and tokens.
            let view = a.annotator_view();
            let answers = view
                .slots
                .iter()
                .map(|s| SlotAnswer {
                    token: s.token.clone(),
                    text: if rng.gen_bool(p) {
                        audio_truth[&s.payload.audio_path].clone()
                    } else {
                        "something else entirely".into()
                    },
                })
                .collect();
            let receipt = o
                .submit(
                    &view.assignment_id,
                    SubmitRequest {
                        submission_id: None,
                        answers,
                        events: Vec::new(),
                        annotator_id: Some(who.into()),
                    },
                )?
                .receipt();
            if receipt.status != speech_hitl::qc::AnnotatorStatus::Active {
                println!(
                    "{who} -> {:?} at score {:.2}",
                    receipt.status, receipt.quality_score
                );
            }
        }
        clock.advance_minutes(1);
    }

    let status = o.job_status(&job)?;
    println!("units by state: {:?}", status.units_by_state);
    for r in &status.roster {
        println!(
            "  {:8} {:?} score {:.2}",
            r.annotator_id, r.status, r.quality_score
        );
    }

    // An expert audit against the audio truth.
    let mut auditor =
        |u: &WorkUnit, answer: &str| Some(audio_truth.get(&u.payload.audio_path)? == answer);
    loop {
        match o.finalize_job(&job, &mut auditor) {
            Ok(report) => {
                println!(
                    "round {}: audited {} of {} -> {:?}",
                    report.round,
                    report.assessment.audited,
                    status.total_units,
                    report.assessment.verdict
                );
                if report.accepted() {
                    break;
                }
            }
            // Rework: let the good annotators redo the requeued units.
            Err(OrchestratorError::JobIncomplete { .. }) => {
                while let Ok(a) = o.next_assignment("alice", &job) {
                    let answers = a
                        .items
                        .iter()
                        .map(|i| SlotAnswer {
                            token: i.token.clone(),
                            text: audio_truth[&i.payload.audio_path].clone(),
                        })
                        .collect();
                    o.submit(
                        &a.assignment_id,
                        SubmitRequest {
                            submission_id: None,
                            answers,
                            events: Vec::new(),
                            annotator_id: None,
                        },
                    )?;
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    println!("finalized: {}", o.job_status(&job)?.finalized);
    Ok(())
}
