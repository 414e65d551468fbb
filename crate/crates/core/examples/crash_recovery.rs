//! Kill the service mid-write and recover: the reopened store, and a plain
//! replay of the log, both land on the state the service had when it died.
//!
//! ```bash
//! cargo run --example crash_recovery
//! ```

use std::sync::Arc;

use anyhow::Result;
use speech_hitl::orchestrator::{
    replay, CrashMode, CrashPlan, JobRequest, ManualClock, Orchestrator, OrchestratorError,
    ServiceConfig, SlotAnswer, SubmitRequest, UnitSpec, EVENTS_FILE,
};
use speech_hitl::qc::{AnswerKind, QcPolicy, TestQuestion, WorkItemPayload};

fn clip(path: String) -> WorkItemPayload {
    WorkItemPayload {
        kind: AnswerKind::Transcription,
        audio_path: path,
        duration_seconds: 3.0,
        prelabel: Some("good morning".into()),
    }
}

fn main() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let clock = Arc::new(ManualClock::new(1_700_000_000_000));
    let config = ServiceConfig {
        snapshot_every: 4,
        ..ServiceConfig::default()
    };
    let o = Orchestrator::open(dir.path(), config.clone(), clock.clone())?;
    o.set_qualification("ann", "en-us", true)?;
    o.create_job(JobRequest {
        job_id: Some("j".into()),
        locale: "en-us".into(),
        guideline_version: "v1".into(),
        policy: QcPolicy::default(),
        tq_pool: (0..50)
            .map(|j| TestQuestion {
                tq_id: format!("t{j}"),
                payload: clip(format!("/t{j}.wav")),
                ground_truth: "good morning".into(),
                verified_by: "lead".into(),
            })
            .collect(),
        sessions: Vec::new(),
        units: (0..100)
            .map(|i| UnitSpec {
                unit_id: format!("u{i}"),
                session_id: "s".into(),
                payload: clip(format!("/u{i}.wav")),
                prelabel_mode: None,
                locale: None,
            })
            .collect(),
    })?;

    let at_seq = o.read(|s| s.seq) + 9;
    o.inject_crash(Some(CrashPlan {
        at_seq,
        mode: CrashMode::TornWrite,
    }));
    let err = loop {
        let step = o.next_assignment("ann", "j").and_then(|a| {
            let answers = a
                .items
                .iter()
                .map(|i| SlotAnswer {
                    token: i.token.clone(),
                    text: "good morning".into(),
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
            )
        });
        if let Err(e) = step {
            break e;
        }
    };
    assert!(matches!(err, OrchestratorError::Crashed));
    let live = o.state();
    println!("crashed at seq {at_seq}; live state has seq {}", live.seq);
    let tail = std::fs::read_to_string(dir.path().join(EVENTS_FILE))?;
    println!("log ends with a torn line: {}", !tail.ends_with('\n'));
    drop(o);

    let reopened = Orchestrator::open(dir.path(), config, clock)?;
    println!(
        "reopened state equals live state: {}",
        reopened.state() == live
    );
    let (replayed, _) = replay(None, &reopened.log_lines()?)?;
    println!("log-only replay equals live state: {}", replayed == live);
    println!(
        "still serving: {}",
        reopened.next_assignment("ann", "j").is_ok()
    );
    Ok(())
}
