//! Small jobs with known truths for driving the service directly.

use std::collections::BTreeMap;
use std::sync::Arc;

use speech_hitl::orchestrator::{
    JobRequest, ManualClock, Orchestrator, ServiceConfig, SlotAnswer, SubmitRequest, UnitSpec,
};
use speech_hitl::qc::{
    AnswerKind, Assignment, BehaviorEvent, ItemRef, QcPolicy, TestQuestion, WorkItemPayload,
};

pub const LOCALE: &str = "en-us";

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(1_700_000_000_000))
}

pub fn ephemeral(seed: u64) -> (Orchestrator, Arc<ManualClock>) {
    let c = clock();
    let o = Orchestrator::ephemeral(
        ServiceConfig {
            seed,
            ..ServiceConfig::default()
        },
        c.clone(),
    );
    (o, c)
}

pub fn unit_truth(i: usize) -> String {
    format!("unit number {i} says hello world today")
}

pub fn tq_truth(j: usize) -> String {
    format!("test question {j} reads the quick brown fox")
}

fn payload(path: String, prelabel: Option<String>) -> WorkItemPayload {
    WorkItemPayload {
        kind: AnswerKind::Transcription,
        audio_path: path,
        duration_seconds: 5.0,
        prelabel,
    }
}

/// `units` assisted units (correct pre-labels) and `pool` test questions.
pub fn job_request(job_id: &str, units: usize, pool: usize, policy: QcPolicy) -> JobRequest {
    JobRequest {
        job_id: Some(job_id.to_string()),
        locale: LOCALE.into(),
        guideline_version: "v1".into(),
        policy,
        tq_pool: (0..pool)
            .map(|j| TestQuestion {
                tq_id: format!("{job_id}-tq{j:04}"),
                payload: payload(format!("/clips/{job_id}/tq{j}.wav"), Some(tq_truth(j))),
                ground_truth: tq_truth(j),
                verified_by: "checker".into(),
            })
            .collect(),
        sessions: Vec::new(),
        units: (0..units)
            .map(|i| UnitSpec {
                unit_id: format!("{job_id}-u{i:05}"),
                session_id: "s1".into(),
                payload: payload(format!("/clips/{job_id}/u{i}.wav"), Some(unit_truth(i))),
                prelabel_mode: None,
                locale: None,
            })
            .collect(),
    }
}

/// Index of a unit or test question from its id.
fn index_of(id: &str) -> usize {
    id.rsplit(|c: char| !c.is_ascii_digit())
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

pub fn truth_of(item: &ItemRef) -> String {
    match item {
        ItemRef::Unit(u) => unit_truth(index_of(u)),
        ItemRef::TestQuestion(t) => tq_truth(index_of(t)),
    }
}

/// Answers every slot; `right(slot)` decides whether the answer is the truth
/// or garbage.
pub fn answer(a: &Assignment, mut right: impl FnMut(&ItemRef) -> bool) -> SubmitRequest {
    SubmitRequest {
        submission_id: Some(format!("sub-{}", a.assignment_id)),
        answers: a
            .items
            .iter()
            .map(|i| SlotAnswer {
                token: i.token.clone(),
                text: if right(&i.item) {
                    truth_of(&i.item)
                } else {
                    "completely different words spoken here instead".into()
                },
            })
            .collect(),
        events: a
            .items
            .iter()
            .map(|i| BehaviorEvent {
                assignment_id: a.assignment_id.clone(),
                slot_index: i.slot_index,
                listen_coverage: 1.0,
                edit_count: 2,
                edit_time_ms: 3000,
                dwell_time_ms: 9000,
                audio_seconds: 5.0,
                mode: speech_hitl::pretag::PrelabelMode::Assisted,
            })
            .collect(),
        annotator_id: None,
    }
}

pub fn all_right(a: &Assignment) -> SubmitRequest {
    answer(a, |_| true)
}

pub fn qualify(o: &Orchestrator, ids: &[&str]) {
    for id in ids {
        o.set_qualification(id, LOCALE, true).unwrap();
    }
}

/// Last `to` state per unit, folded straight from the raw log JSON.
pub fn reduce_unit_states(lines: &[String]) -> BTreeMap<String, String> {
    let mut states = BTreeMap::new();
    for line in lines {
        let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else {
            continue;
        };
        for e in v["events"].as_array().unwrap() {
            match e["type"].as_str().unwrap() {
                "job_created" => {
                    for u in e["units"].as_array().unwrap() {
                        states.insert(
                            u["unit_id"].as_str().unwrap().to_string(),
                            "queued".to_string(),
                        );
                    }
                }
                "unit_transitioned" => {
                    states.insert(
                        e["unit_id"].as_str().unwrap().to_string(),
                        e["to"].as_str().unwrap().to_string(),
                    );
                }
                _ => {}
            }
        }
    }
    states
}
