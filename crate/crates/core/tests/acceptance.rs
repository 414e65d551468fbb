//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line, then exits non-zero on any failure.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::corpus::{load_corpus, save_corpus, validate_corpus, CorpusConfig, Invariant};
use speech_hitl::packaging::{emit_dataset, select_subset, PackagingOptions, SelectionMethod};
use speech_hitl::pretag::{gate_prelabels, GatingPolicy, PrelabelMode};
use speech_hitl::qc::{assess_delivery, plan_sample, QaVerdict, ONE_SIDED_95_Z};
use speech_hitl::sim::ab_compare;
use speech_hitl::speaker::SpeakerDb;

use common::crash::crash_run;
use common::fuzz::{fuzz_corpus, reported};
use common::packaging::{brute_force_optimum, pool, request};
use common::qc::{audit_cases, cochran, tq_position_test, wilson_lower_bisect};
use common::sim::{ab_arms, removal_probability, removal_tally};
use common::speaker::{embed, enroll_plan, plan, DIM};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn json_tree(root: &Path) -> BTreeMap<PathBuf, serde_json::Value> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "json") {
                let v = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), v);
            }
        }
    }
    out
}

fn schema_fidelity() -> Outcome {
    let t = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/appendix");
    let corpus = load_corpus(&dir).map_err(|e| e.to_string())?;
    let violations = validate_corpus(&corpus, &CorpusConfig::default())
        .violations
        .len();
    let out = tempfile::tempdir().unwrap();
    save_corpus(&corpus, out.path()).map_err(|e| e.to_string())?;
    let (a, b) = (json_tree(&dir), json_tree(out.path()));
    let reloaded = load_corpus(out.path()).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    check(
        a.len() == 4 && a == b && reloaded == corpus && violations == 0 && secs < 1.0,
        format!(
            "{} files, {violations} violations, identical={}, {secs:.3}s",
            a.len(),
            a == b
        ),
    )
}

fn constraint_enforcement() -> Outcome {
    let t = Instant::now();
    let config = CorpusConfig::default();
    let (mut planted, mut missed, mut spurious) = (0, 0, 0);
    for seed in 0..1000 {
        let (corpus, plants) = fuzz_corpus(seed);
        let found = reported(&validate_corpus(&corpus, &config));
        planted += plants.len();
        missed += plants.difference(&found).count();
        spurious += found.difference(&plants).count();
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        missed == 0 && spurious == 0 && planted > 0 && secs < 30.0,
        format!("{planted} planted, {missed} missed, {spurious} false positives, {secs:.2}s"),
    )
}

fn tq_uniformity() -> Outcome {
    let (counts, p) = tq_position_test(20_000, 1);
    check(p > 0.01, format!("slot counts {counts:?}, p={p:.4}"))
}

fn removal_power() -> Outcome {
    let runs = 10_000;
    let t = removal_tally(runs, 1_000_000);
    let rate = t.removed as f64 / runs as f64;
    let oracle = removal_probability(0.6, 2, 3, 5, 0.8);
    check(
        (rate - oracle).abs() <= 0.02 && t.stranded == 0 && t.sole_units > 0,
        format!(
            "rate {rate:.4} vs closed form {oracle:.5}, {} sole-annotated units, {} not re-queued",
            t.sole_units, t.stranded
        ),
    )
}

fn gating() -> Outcome {
    let p = GatingPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut xs: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
    xs.extend([0.85, 0.85 - 1e-12, 0.0, 1.0]);
    let wrong = xs
        .iter()
        .filter(|&&x| (gate_prelabels(x, &p) == PrelabelMode::Assisted) != (x >= 0.85))
        .count();
    xs.sort_by(f64::total_cmp);
    let inversions = xs
        .windows(2)
        .filter(|w| {
            gate_prelabels(w[0], &p) == PrelabelMode::Assisted
                && gate_prelabels(w[1], &p) == PrelabelMode::FromScratch
        })
        .count();
    check(
        wrong == 0 && inversions == 0,
        format!(
            "{} confidences, {wrong} misrouted, {inversions} inversions",
            xs.len()
        ),
    )
}

fn priming() -> Outcome {
    let (a, b) = ab_arms(0.5, 0.3, 10_000);
    let poor = ab_compare(&a, &b, 1000).map_err(|e| e.to_string())?;
    let (a, b) = ab_arms(0.95, 0.3, 20_000);
    let good = ab_compare(&a, &b, 1000).map_err(|e| e.to_string())?;
    check(
        poor.defect_delta > 0.0 && poor.p_assisted_more_defects < 0.01 && good.speed_ratio > 1.0,
        format!(
            "accuracy 0.5: delta {:+.4}, p={:.2e}; accuracy 0.95: scratch/assisted time {:.3}",
            poor.defect_delta, poor.p_assisted_more_defects, good.speed_ratio
        ),
    )
}

fn sampling_math() -> Outcome {
    let inf = plan_sample(None, 0.95, 0.05, 0.5)
        .map_err(|e| e.to_string())?
        .sample_size;
    let hundred = plan_sample(Some(100), 0.95, 0.05, 0.5)
        .map_err(|e| e.to_string())?
        .sample_size;
    let closed = (
        cochran(None, 0.95, 0.05, 0.5),
        cochran(Some(100.0), 0.95, 0.05, 0.5),
    );
    let cases = audit_cases();
    let mut mismatches = 0;
    for c in &cases {
        let mut results = vec![true; c.passed as usize];
        results.extend(vec![false; (c.n - c.passed) as usize]);
        let a = assess_delivery(&results, c.threshold).map_err(|e| e.to_string())?;
        let reference = wilson_lower_bisect(c.passed, c.n, ONE_SIDED_95_Z);
        if (a.verdict == QaVerdict::Accept) != c.accept || (a.wilson_lower - reference).abs() > 1e-9
        {
            mismatches += 1;
        }
    }
    check(
        (inf, hundred) == (385, 80) && closed == (385, 80) && cases.len() == 50 && mismatches == 0,
        format!(
            "sizes {inf}/{hundred} (closed form {}/{}), {mismatches} of {} verdicts differ",
            closed.0,
            closed.1,
            cases.len()
        ),
    )
}

fn packaging_bound() -> Outcome {
    let t = Instant::now();
    let opts = PackagingOptions {
        exact_search_budget: 0,
        ..PackagingOptions::default()
    };
    let (mut over, mut cap_breaches, mut worst) = (0, 0, 0.0f64);
    let out = tempfile::tempdir().unwrap();
    for seed in 0..200 {
        let corpus = pool(seed);
        let s = request(seed);
        let r = select_subset(&corpus, &s, &opts, seed).map_err(|e| e.to_string())?;
        if r.method != SelectionMethod::Greedy {
            return Err(format!("seed {seed}: method {:?}", r.method));
        }
        let opt = brute_force_optimum(&corpus, &s);
        if r.max_deviation > 1.25 * opt + 1e-9 {
            over += 1;
        }
        if opt > 0.0 {
            worst = worst.max(r.max_deviation / opt);
        }
        let dir = out.path().join(format!("pkg{seed}"));
        emit_dataset(&r, &corpus, &s.name, &dir, true).map_err(|e| e.to_string())?;
        let emitted = load_corpus(&dir).map_err(|e| e.to_string())?;
        let report = validate_corpus(&emitted, &CorpusConfig::default());
        cap_breaches += report
            .violations
            .iter()
            .filter(|v| v.invariant == Invariant::SpeakerCapExceeded)
            .count();
        cap_breaches += r.speaker_minutes.values().filter(|&&m| m >= 60.0).count();
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        over == 0 && cap_breaches == 0 && secs < 300.0,
        format!("200 pools, {over} above 1.25x optimum, worst ratio {worst:.3}, {cap_breaches} cap breaches, {secs:.1}s"),
    )
}

fn speaker_recovery() -> Outcome {
    let mut detail = Vec::new();
    for seed in 0..5 {
        let p = plan(seed);
        let (db, problem) = enroll_plan(&p, seed);
        if let Some(problem) = problem {
            return Err(format!("seed {seed}: {problem}"));
        }
        detail.push(db.speakers().len());
    }
    let p = plan(42);
    let mut db = SpeakerDb::new(DIM, 0.7, 42);
    for e in &p {
        let segs: Vec<_> = e.segments.iter().map(|(v, d)| (embed(v), *d)).collect();
        db.enroll_session_speaker(&e.session, &segs)
            .map_err(|e| e.to_string())?;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enrollment.jsonl");
    db.write_log(&path).map_err(|e| e.to_string())?;
    let events = SpeakerDb::read_log(&path).map_err(|e| e.to_string())?;
    let replayed = SpeakerDb::replay(DIM, 0.7, 7, &events).map_err(|e| e.to_string())?;
    let same = replayed.snapshot_json().as_bytes() == db.snapshot_json().as_bytes();
    check(
        same,
        format!("identities per seed {detail:?}, replay byte-identical={same}"),
    )
}

fn crash_consistency() -> Outcome {
    let (mut recovered, mut log_only, mut doubles) = (0, 0, 0);
    let mut modes = BTreeMap::new();
    for seed in 0..100 {
        let dir = tempfile::tempdir().unwrap();
        let run = crash_run(seed, dir.path());
        recovered += run.recovered_matches as usize;
        log_only += run.log_only_matches as usize;
        doubles += run.double_leases;
        *modes.entry(format!("{:?}", run.mode)).or_insert(0) += 1;
    }
    check(
        recovered == 100 && log_only == 100 && doubles == 0,
        format!("100 crash points {modes:?}: {recovered} recovered, {log_only} log-only equal, {doubles} double leases"),
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture may be passed; only a name filter is honored.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("schema fidelity", schema_fidelity),
        ("constraint enforcement", constraint_enforcement),
        ("tq injection uniformity", tq_uniformity),
        ("removal power", removal_power),
        ("gating", gating),
        ("priming directionality", priming),
        ("sampling math", sampling_math),
        ("packaging optimality bound", packaging_bound),
        ("speaker db recovery", speaker_recovery),
        ("crash consistency", crash_consistency),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {name:<28} {d} [{secs:.2}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name:<28} {d} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
