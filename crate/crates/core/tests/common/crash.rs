//! Randomized interleavings of annotator traffic against a file-backed store,
//! with one injected crash per run.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::orchestrator::{
    replay, AssignmentStatus, CrashMode, CrashPlan, ManualClock, Orchestrator, OrchestratorError,
    ServiceConfig, State, UnitState, VerdictAuditor,
};
use speech_hitl::qc::QcPolicy;

use super::orch::{answer, job_request, LOCALE};

#[derive(Debug)]
pub struct CrashRun {
    pub seed: u64,
    pub mode: CrashMode,
    pub crash_seq: u64,
    pub ops: usize,
    /// Reopened store equals the live state at the crash.
    pub recovered_matches: bool,
    /// Plain log replay (no snapshot) equals the live state too.
    pub log_only_matches: bool,
    pub double_leases: usize,
}

/// A unit held by two live leases, or a leased unit whose lease is not live.
pub fn lease_violations(st: &State) -> usize {
    let mut seen = BTreeSet::new();
    let mut bad = 0;
    for rec in st
        .assignments
        .values()
        .filter(|r| r.status == AssignmentStatus::Leased)
    {
        for u in rec.assignment.unit_ids() {
            if !seen.insert(u.to_string()) {
                bad += 1;
            }
        }
    }
    for u in st.units.values().filter(|u| u.state == UnitState::Leased) {
        let live = u
            .lease
            .as_ref()
            .and_then(|a| st.assignments.get(a))
            .is_some_and(|r| r.status == AssignmentStatus::Leased);
        if !live {
            bad += 1;
        }
    }
    bad
}

fn open(dir: &Path, seed: u64, clock: Arc<ManualClock>) -> Orchestrator {
    Orchestrator::open(
        dir,
        ServiceConfig {
            seed,
            snapshot_every: 7,
            sync: false,
        },
        clock,
    )
    .expect("open store")
}

pub fn crash_run(seed: u64, dir: &Path) -> CrashRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clock = Arc::new(ManualClock::new(1_700_000_000_000));
    let orch = open(dir, seed, clock.clone());
    let annotators = ["a0", "a1", "a2", "a3", "a4"];
    for a in annotators {
        orch.set_qualification(a, LOCALE, true).unwrap();
    }
    let policy = QcPolicy {
        assignment_size: 4,
        tq_per_assignment: 1,
        ..QcPolicy::default()
    };
    orch.create_job(job_request("crash", 200, 600, policy))
        .unwrap();
    let start = orch.read(|s| s.seq);
    let mode = *[
        CrashMode::BeforeWrite,
        CrashMode::TornWrite,
        CrashMode::AfterWrite,
    ]
    .choose(&mut rng)
    .unwrap();
    let crash_seq = start + rng.gen_range(1..=60);
    orch.inject_crash(Some(CrashPlan {
        at_seq: crash_seq,
        mode,
    }));
    // Per-annotator accuracy so some get removed along the way.
    let accuracy: Vec<f64> = annotators.iter().map(|_| rng.gen_range(0.6..1.0)).collect();

    let mut double_leases = 0;
    let mut ops = 0;
    let mut crashed = false;
    while !crashed && ops < 2000 {
        ops += 1;
        let i = rng.gen_range(0..annotators.len());
        let r = match rng.gen_range(0..10) {
            0..=3 => orch.next_assignment(annotators[i], "crash").map(|_| ()),
            4..=6 => {
                let live: Vec<_> = orch.read(|s| {
                    s.assignments
                        .values()
                        .filter(|r| r.status == AssignmentStatus::Leased)
                        .map(|r| r.assignment.clone())
                        .collect()
                });
                match live.choose(&mut rng) {
                    Some(a) => {
                        let who = annotators
                            .iter()
                            .position(|x| *x == a.annotator_id)
                            .unwrap();
                        let p = accuracy[who];
                        let mut req = answer(a, |_| rng.gen_bool(p));
                        if rng.gen_bool(0.1) {
                            req.events[0].listen_coverage = 0.5;
                        }
                        let first = orch.submit(&a.assignment_id, req.clone());
                        // Retried submissions must be no-ops.
                        match first {
                            Ok(out) if rng.gen_bool(0.3) => {
                                match orch.submit(&a.assignment_id, req) {
                                    Ok(again) => {
                                        assert_eq!(again, out);
                                        Ok(())
                                    }
                                    Err(e) => Err(e),
                                }
                            }
                            other => other.map(|_| ()),
                        }
                    }
                    None => Ok(()),
                }
            }
            7 => {
                clock.advance_minutes(rng.gen_range(1..40));
                orch.expire_leases().map(|_| ())
            }
            8 => orch
                .finalize_job("crash", &mut VerdictAuditor(Default::default()))
                .map(|_| ()),
            _ => {
                let live: Vec<String> = orch.read(|s| {
                    s.assignments
                        .values()
                        .filter(|r| r.status == AssignmentStatus::Leased)
                        .map(|r| r.assignment.assignment_id.clone())
                        .collect()
                });
                match live.choose(&mut rng) {
                    Some(id) => orch.record_events(id, Vec::new()).map(|_| ()),
                    None => Ok(()),
                }
            }
        };
        match r {
            Err(OrchestratorError::Crashed) => crashed = true,
            Err(
                OrchestratorError::NoWork(_)
                | OrchestratorError::AnnotatorRemoved(_)
                | OrchestratorError::LeaseExpired(_)
                | OrchestratorError::JobIncomplete { .. }
                | OrchestratorError::AuditRequired { .. },
            ) => {}
            Err(e) => panic!("seed {seed}: unexpected error {e}"),
            Ok(()) => {}
        }
        double_leases += lease_violations(&orch.state());
        if !crashed && ops % 50 == 0 && orch.read(|s| s.seq) < crash_seq && rng.gen_bool(0.2) {
            // Keep traffic flowing toward the crash point.
            clock.advance_minutes(31);
        }
    }
    assert!(
        crashed,
        "seed {seed}: crash point {crash_seq} never reached"
    );
    let live = orch.state();
    let lines = orch.log_lines().unwrap();
    drop(orch);

    let (log_only, _) = replay(None, &lines).expect("log replays");
    let reopened = open(dir, seed, clock.clone());
    let recovered = reopened.state();
    // The recovered service keeps working on a clean log.
    for a in annotators {
        match reopened.next_assignment(a, "crash") {
            Ok(_)
            | Err(OrchestratorError::NoWork(_))
            | Err(OrchestratorError::AnnotatorRemoved(_)) => {}
            Err(e) => panic!("seed {seed}: recovered service failed: {e}"),
        }
    }
    double_leases += lease_violations(&reopened.state());
    let again = open(dir, seed, clock);
    assert_eq!(
        again.state(),
        reopened.state(),
        "seed {seed}: second recovery differs"
    );

    CrashRun {
        seed,
        mode,
        crash_seq,
        ops,
        recovered_matches: recovered == live,
        log_only_matches: log_only == live,
        double_leases,
    }
}
