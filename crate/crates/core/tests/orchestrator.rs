mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::orchestrator::{
    AssignmentStatus, Clock, Orchestrator, OrchestratorError, ServiceConfig, UnitState,
    VerdictAuditor, WorkUnit, REPORTS_DIR,
};
use speech_hitl::pretag::{RawSessionInput, SampleFormat};
use speech_hitl::qc::{AnnotatorStatus, ItemRef, QcPolicy};

use common::crash::{crash_run, lease_violations};
use common::orch::{
    all_right, answer, ephemeral, job_request, qualify, reduce_unit_states, truth_of, LOCALE,
};

fn raw(i: usize) -> RawSessionInput {
    RawSessionInput {
        session_id: format!("sess{i:04}"),
        audio_path: format!("/raw/sess{i:04}.wav"),
        title: Some(format!("session {i}")),
        tags: vec!["news".into()],
        sample_format: SampleFormat::default(),
    }
}

#[test]
fn ingest_is_idempotent_and_scannable() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = ephemeral(1);
    let empty = o.ingest(Vec::new()).unwrap();
    assert_eq!(empty.batch_id, None);
    assert!(empty.ingested.is_empty());

    let batch: Vec<_> = (0..5).map(raw).collect();
    o.ingest(batch.clone()).unwrap();
    let before = o.state();
    let again = o.ingest(batch).unwrap();
    assert_eq!(again.batch_id, None);
    assert_eq!(again.duplicates.len(), 5);
    assert_eq!(o.state(), before);

    let o =
        Orchestrator::open(dir.path(), ServiceConfig::default(), common::orch::clock()).unwrap();
    let receipt = o.ingest((0..100).map(raw).collect()).unwrap();
    assert_eq!(receipt.ingested.len(), 100);
    drop(o);
    // Scan the raw log rather than trusting the reducer.
    let text = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    let mut ids = BTreeSet::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for e in v["events"].as_array().unwrap() {
            for input in e["inputs"].as_array().into_iter().flatten() {
                ids.insert(input["session_id"].as_str().unwrap().to_string());
            }
        }
    }
    assert_eq!(ids.len(), 100);
    let reopened =
        Orchestrator::open(dir.path(), ServiceConfig::default(), common::orch::clock()).unwrap();
    assert_eq!(reopened.read(|s| s.sessions.len()), 100);
}

#[test]
fn removed_and_unqualified_annotators_get_no_work() {
    let (o, _) = ephemeral(2);
    o.create_job(job_request("j", 50, 50, QcPolicy::default()))
        .unwrap();
    assert!(matches!(
        o.next_assignment("ghost", "j"),
        Err(OrchestratorError::UnknownAnnotator(_))
    ));
    o.set_qualification("fr", "fr-fr", true).unwrap();
    assert!(matches!(
        o.next_assignment("fr", "j"),
        Err(OrchestratorError::NotQualified { .. })
    ));
    qualify(&o, &["bad"]);
    for _ in 0..3 {
        let a = o.next_assignment("bad", "j").unwrap();
        let out = o
            .submit(
                &a.assignment_id,
                answer(&a, |i| matches!(i, ItemRef::Unit(_))),
            )
            .unwrap();
        if out.removed {
            break;
        }
    }
    let e = o.next_assignment("bad", "j").unwrap_err();
    assert_eq!(e.code(), "ANNOTATOR_REMOVED");
}

#[test]
fn one_unit_goes_to_exactly_one_of_two_concurrent_callers() {
    for seed in 0..20 {
        let (o, _) = ephemeral(seed);
        let policy = QcPolicy {
            tq_per_assignment: 0,
            ..QcPolicy::default()
        };
        o.create_job(job_request("j", 1, 0, policy)).unwrap();
        qualify(&o, &["x", "y"]);
        let o = Arc::new(o);
        let handles: Vec<_> = ["x", "y"]
            .into_iter()
            .map(|who| {
                let o = o.clone();
                std::thread::spawn(move || o.next_assignment(who, "j"))
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        let winners = results.iter().filter(|r| r.is_ok()).count();
        let no_work = results
            .iter()
            .filter(|r| matches!(r, Err(OrchestratorError::NoWork(_))))
            .count();
        assert_eq!((winners, no_work), (1, 1));
    }
}

#[test]
fn expired_lease_is_released_after_thirty_minutes() {
    let (o, clock) = ephemeral(3);
    let policy = QcPolicy {
        tq_per_assignment: 0,
        ..QcPolicy::default()
    };
    o.create_job(job_request("j", 1, 0, policy)).unwrap();
    qualify(&o, &["x", "y"]);
    let a = o.next_assignment("x", "j").unwrap();
    assert_eq!(a.lease_expiry, clock.now_ms() + 30 * 60_000);
    clock.advance_minutes(29);
    assert!(matches!(
        o.next_assignment("y", "j"),
        Err(OrchestratorError::NoWork(_))
    ));
    clock.advance_minutes(1);
    let b = o.next_assignment("y", "j").unwrap();
    assert_eq!(
        b.unit_ids().collect::<Vec<_>>(),
        a.unit_ids().collect::<Vec<_>>()
    );
    let late = o.submit(&a.assignment_id, all_right(&a)).unwrap_err();
    assert_eq!(late.code(), "LEASE_EXPIRED");
    assert!(o.submit(&b.assignment_id, all_right(&b)).is_ok());
    assert_eq!(
        o.submit("nope", all_right(&b)).unwrap_err().code(),
        "UNKNOWN_ASSIGNMENT"
    );
}

#[test]
fn duplicate_submit_is_a_single_transition() {
    let (o, _) = ephemeral(4);
    o.create_job(job_request("j", 20, 20, QcPolicy::default()))
        .unwrap();
    qualify(&o, &["x"]);
    let a = o.next_assignment("x", "j").unwrap();
    let first = o.submit(&a.assignment_id, all_right(&a)).unwrap();
    let seq = o.read(|s| s.seq);
    let second = o.submit(&a.assignment_id, all_right(&a)).unwrap();
    assert_eq!(first, second);
    assert_eq!(o.read(|s| s.seq), seq);
    let unit = a.unit_ids().next().unwrap().to_string();
    let submitted = o
        .log_lines()
        .unwrap()
        .iter()
        .flat_map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["events"].as_array().unwrap().clone()
        })
        .filter(|e| {
            e["type"] == "unit_transitioned"
                && e["unit_id"] == unit.as_str()
                && e["to"] == "submitted"
        })
        .count();
    assert_eq!(submitted, 1);
}

#[test]
fn failing_both_tqs_early_is_recorded_not_removed() {
    let (o, _) = ephemeral(5);
    o.create_job(job_request("j", 20, 20, QcPolicy::default()))
        .unwrap();
    qualify(&o, &["x"]);
    let a = o.next_assignment("x", "j").unwrap();
    let out = o
        .submit(
            &a.assignment_id,
            answer(&a, |i| matches!(i, ItemRef::Unit(_))),
        )
        .unwrap();
    assert_eq!((out.tq_judged, out.tq_correct), (2, 0));
    assert!(!out.removed);
    let p = o.read(|s| s.annotators["x"].clone());
    assert_eq!(p.tq_attempted, 2);
    assert_eq!(p.status, AnnotatorStatus::Active);
}

#[test]
fn hard_validation_and_listen_flags_send_units_back() {
    let (o, _) = ephemeral(6);
    let policy = QcPolicy {
        rules: serde_json::from_value(serde_json::json!([
        {"rule_id": "no-dd", "kind": "format", "parameters": {"check": "no_double_space"},
         "message": "double space"}
        ]))
        .unwrap(),
        ..QcPolicy::default()
    };
    o.create_job(job_request("j", 20, 20, policy)).unwrap();
    qualify(&o, &["x"]);
    let a = o.next_assignment("x", "j").unwrap();
    let mut req = all_right(&a);
    let unit_slots: Vec<usize> = a
        .items
        .iter()
        .filter(|i| !i.is_tq())
        .map(|i| i.slot_index)
        .collect();
    req.events[unit_slots[0]].listen_coverage = 0.4;
    let out = o.submit(&a.assignment_id, req).unwrap();
    assert_eq!(out.rejected.len(), 1);
    assert_eq!(
        out.rejected[0].reasons,
        vec!["LISTEN_INCOMPLETE".to_string()]
    );
    let bounced = out.rejected[0].unit_id.clone().unwrap();
    assert_eq!(o.read(|s| s.units[&bounced].state), UnitState::Queued);
    assert_eq!(out.accepted_units.len(), a.unit_ids().count() - 1);
    let flags = o.read(|s| s.annotators["x"].behavior_flags.clone());
    assert_eq!(flags.get("LISTEN_INCOMPLETE"), Some(&1));
}

#[test]
fn removal_recycles_sole_annotated_units() {
    let (o, _) = ephemeral(7);
    o.create_job(job_request("j", 100, 100, QcPolicy::default()))
        .unwrap();
    qualify(&o, &["good", "bad"]);
    let g = o.next_assignment("good", "j").unwrap();
    o.submit(&g.assignment_id, all_right(&g)).unwrap();
    let mut removed = false;
    while !removed {
        let a = o.next_assignment("bad", "j").unwrap();
        let out = o
            .submit(
                &a.assignment_id,
                answer(&a, |i| matches!(i, ItemRef::Unit(_))),
            )
            .unwrap();
        removed = out.removed;
    }
    let st = o.state();
    let mut by_unit: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &st.answers {
        by_unit.entry(&r.unit_id).or_default().push(&r.annotator_id);
    }
    for (unit, who) in by_unit {
        let u = &st.units[unit];
        if who.iter().all(|w| *w == "bad") {
            assert_eq!(u.state, UnitState::Queued, "{unit}");
            assert!(u.accepted.is_none());
        } else {
            assert_eq!(u.state, UnitState::Accepted);
        }
    }
}

fn finish_all(o: &Orchestrator, job: &str, who: &[&str], mut right: impl FnMut(&ItemRef) -> bool) {
    loop {
        let mut progressed = false;
        for w in who {
            match o.next_assignment(w, job) {
                Ok(a) => {
                    o.submit(&a.assignment_id, answer(&a, &mut right)).unwrap();
                    progressed = true;
                }
                Err(OrchestratorError::NoWork(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        if !progressed {
            return;
        }
    }
}

fn truth_auditor(unit: &WorkUnit, text: &str) -> Option<bool> {
    Some(text == truth_of(&ItemRef::Unit(unit.unit_id.clone())))
}

#[test]
fn clean_job_is_accepted_in_one_round_and_report_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        Orchestrator::open(dir.path(), ServiceConfig::default(), common::orch::clock()).unwrap();
    o.create_job(job_request("j", 100, 100, QcPolicy::default()))
        .unwrap();
    qualify(&o, &["x", "y"]);
    assert_eq!(
        o.finalize_job("j", &mut truth_auditor).unwrap_err().code(),
        "JOB_INCOMPLETE"
    );
    finish_all(&o, "j", &["x", "y"], |_| true);
    let e = o
        .finalize_job("j", &mut VerdictAuditor::default())
        .unwrap_err();
    let OrchestratorError::AuditRequired { sample_ids, .. } = e else {
        panic!("{e}")
    };
    assert_eq!(sample_ids.len(), 80);
    assert_eq!(o.audit_sample("j").unwrap(), sample_ids);
    let report = o.finalize_job("j", &mut truth_auditor).unwrap();
    assert!(report.accepted());
    assert_eq!(report.round, 1);
    assert_eq!(report.sample_ids, sample_ids);
    let st = o.state();
    assert!(st.jobs["j"].finalized);
    assert!(st
        .units
        .values()
        .all(|u| u.state == UnitState::Final && u.accepted.is_some()));
    let saved: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join(REPORTS_DIR).join("j-round01.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(saved["assessment"]["verdict"], "Accept");
    // Finalizing again hands back the same report.
    assert_eq!(o.finalize_job("j", &mut truth_auditor).unwrap(), report);
}

#[test]
fn planted_defects_force_rework_until_clean() {
    let (o, _) = ephemeral(8);
    o.create_job(job_request("j", 100, 400, QcPolicy::default()))
        .unwrap();
    qualify(&o, &["x", "y", "z"]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Units are wrong 20% of the time on the first pass; TQs always right.
    finish_all(&o, "j", &["x", "y", "z"], |i| match i {
        ItemRef::TestQuestion(_) => true,
        ItemRef::Unit(_) => rng.gen_bool(0.8),
    });
    let first = o.finalize_job("j", &mut truth_auditor).unwrap();
    assert!(!first.accepted());
    assert!(first.requeued_ids.len() >= first.failed_ids.len());
    assert!(!first.failed_ids.is_empty());
    let mut rounds = 1;
    loop {
        finish_all(&o, "j", &["x", "y", "z"], |_| true);
        let r = o.finalize_job("j", &mut truth_auditor).unwrap();
        rounds += 1;
        if r.accepted() {
            break;
        }
        assert!(rounds < 20);
    }
    assert!(rounds >= 2);
    assert_eq!(o.job_status("j").unwrap().qa_rounds.len(), rounds);
}

#[test]
fn empty_job_is_incomplete() {
    let (o, _) = ephemeral(9);
    o.create_job(job_request("empty", 0, 0, QcPolicy::default()))
        .unwrap();
    assert_eq!(
        o.finalize_job("empty", &mut truth_auditor)
            .unwrap_err()
            .code(),
        "JOB_INCOMPLETE"
    );
    assert_eq!(
        o.finalize_job("none", &mut truth_auditor)
            .unwrap_err()
            .code(),
        "UNKNOWN_JOB"
    );
}

#[test]
fn thousand_submissions_match_log_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let o = Orchestrator::open(
        dir.path(),
        ServiceConfig {
            seed: 10,
            snapshot_every: 100,
            sync: false,
        },
        common::orch::clock(),
    )
    .unwrap();
    let policy = QcPolicy {
        assignment_size: 4,
        tq_per_assignment: 1,
        ..QcPolicy::default()
    };
    o.create_job(job_request("big", 5000, 3000, policy))
        .unwrap();
    let who: Vec<String> = (0..12).map(|i| format!("ann{i:02}")).collect();
    let refs: Vec<&str> = who.iter().map(String::as_str).collect();
    qualify(&o, &refs);
    let accuracy: Vec<f64> = (0..12).map(|i| if i < 3 { 0.5 } else { 0.95 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut submissions = 0;
    while submissions < 1000 {
        let i = rng.gen_range(0..who.len());
        let a = match o.next_assignment(&who[i], "big") {
            Ok(a) => a,
            Err(OrchestratorError::AnnotatorRemoved(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let mut req = answer(&a, |_| rng.gen_bool(accuracy[i]));
        if rng.gen_bool(0.05) {
            req.events[0].listen_coverage = 0.2;
        }
        o.submit(&a.assignment_id, req).unwrap();
        submissions += 1;
    }
    let st = o.state();
    assert_eq!(lease_violations(&st), 0);
    let oracle = reduce_unit_states(&o.log_lines().unwrap());
    assert_eq!(oracle.len(), st.units.len());
    for (id, u) in &st.units {
        assert_eq!(oracle[id], u.state.as_str(), "{id}");
    }
    // Every accepted answer came from an annotator active when it was accepted.
    let mut removed_at: BTreeMap<String, u64> = BTreeMap::new();
    let mut accepted_at: Vec<(String, u64)> = Vec::new();
    for line in o.log_lines().unwrap() {
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let seq = v["seq"].as_u64().unwrap();
        for e in v["events"].as_array().unwrap() {
            if e["type"] == "profile_updated" && e["profile"]["status"] == "removed" {
                removed_at
                    .entry(e["profile"]["annotator_id"].as_str().unwrap().into())
                    .or_insert(seq);
            }
            if e["type"] == "answer_accepted" {
                accepted_at.push((e["record"]["annotator_id"].as_str().unwrap().into(), seq));
            }
        }
    }
    assert!(!removed_at.is_empty());
    for (who, seq) in accepted_at {
        assert!(removed_at.get(&who).is_none_or(|r| seq < *r));
    }
    let reopened =
        Orchestrator::open(dir.path(), ServiceConfig::default(), common::orch::clock()).unwrap();
    assert_eq!(reopened.state(), st);
    assert!(st
        .assignments
        .values()
        .all(|r| r.status != AssignmentStatus::Expired));
}

#[test]
fn crash_points_recover_exactly() {
    for seed in 0..25 {
        let dir = tempfile::tempdir().unwrap();
        let run = crash_run(seed, dir.path());
        assert!(run.recovered_matches, "{run:?}");
        assert!(run.log_only_matches, "{run:?}");
        assert_eq!(run.double_leases, 0, "{run:?}");
    }
}

#[test]
fn status_counts_units() {
    let (o, _) = ephemeral(11);
    o.create_job(job_request("j", 25, 25, QcPolicy::default()))
        .unwrap();
    qualify(&o, &["x"]);
    let a = o.next_assignment("x", "j").unwrap();
    let s = o.job_status("j").unwrap();
    assert_eq!(s.total_units, 25);
    assert_eq!(s.units_by_state["leased"], 10);
    assert_eq!(s.units_by_state["queued"], 15);
    assert_eq!(s.live_leases, 1);
    assert_eq!(s.locale, LOCALE);
    // Same lease handed back while it is live.
    assert_eq!(o.next_assignment("x", "j").unwrap(), a);
}
