//! Reference computations for QC sampling and test-question placement.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::qc::{build_assignment, AnswerKind, ItemRef, TestQuestion, WorkItemPayload};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn payload(path: String) -> WorkItemPayload {
    WorkItemPayload {
        kind: AnswerKind::Transcription,
        audio_path: path,
        duration_seconds: 6.0,
        prelabel: Some("a b c".into()),
    }
}

/// Slot-position counts of test questions over `n` assignments of
/// 10 units + 2 test questions, and the chi-square p-value against uniform.
pub fn tq_position_test(n: usize, seed: u64) -> (Vec<u64>, f64) {
    let units: Vec<(String, WorkItemPayload)> = (0..10)
        .map(|i| (format!("u{i}"), payload(format!("/u{i}.wav"))))
        .collect();
    let pool: Vec<TestQuestion> = (0..50)
        .map(|j| TestQuestion {
            tq_id: format!("tq{j}"),
            payload: payload(format!("/tq{j}.wav")),
            ground_truth: "a b c".into(),
            verified_by: "x".into(),
        })
        .collect();
    let used = BTreeSet::new();
    let mut counts = vec![0u64; 12];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in 0..n {
        let asg =
            build_assignment(&format!("a{a}"), "ann", &units, &pool, 2, &used, rng.gen()).unwrap();
        assert_eq!(asg.items.len(), 12);
        for item in &asg.items {
            if matches!(item.item, ItemRef::TestQuestion(_)) {
                counts[item.slot_index] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / 12.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(11.0).unwrap().cdf(chi2);
    (counts, p)
}

/// Wilson lower bound found by bisection on the defining quadratic
/// (p_hat - p)^2 = z^2 p (1 - p) / n over [0, p_hat].
pub fn wilson_lower_bisect(passed: u64, n: u64, z: f64) -> f64 {
    let p_hat = passed as f64 / n as f64;
    let f = |p: f64| (p_hat - p).powi(2) - z * z * p * (1.0 - p) / n as f64;
    let (mut lo, mut hi) = (0.0, p_hat);
    if f(lo) <= 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn one_sided_z(confidence: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(confidence)
}

/// Cochran size with finite-population correction, by hand.
pub fn cochran(population: Option<f64>, confidence: f64, margin: f64, p: f64) -> u64 {
    let z = Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(0.5 + confidence / 2.0);
    let n0 = z * z * p * (1.0 - p) / (margin * margin);
    let n = match population {
        Some(big) => n0 / (1.0 + (n0 - 1.0) / big),
        None => n0,
    };
    n.ceil() as u64
}

pub struct AuditCase {
    pub passed: u64,
    pub n: u64,
    pub threshold: f64,
    pub accept: bool,
}

/// 50 audit outcomes spread over sizes and pass rates, each with the
/// reference verdict. Cases within 1e-6 of the threshold are skipped.
pub fn audit_cases() -> Vec<AuditCase> {
    let z = one_sided_z(0.95);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut out = vec![
        AuditCase {
            passed: 385,
            n: 385,
            threshold: 0.95,
            accept: true,
        },
        AuditCase {
            passed: 300,
            n: 385,
            threshold: 0.95,
            accept: false,
        },
    ];
    while out.len() < 50 {
        let n = rng.gen_range(1..=600);
        let rate: f64 = rng.gen_range(0.85..=1.0);
        let passed = ((n as f64 * rate).round() as u64).min(n);
        let threshold = [0.9, 0.95, 0.97][rng.gen_range(0..3)];
        let lower = wilson_lower_bisect(passed, n, z);
        if (lower - threshold).abs() < 1e-6 {
            continue;
        }
        out.push(AuditCase {
            passed,
            n,
            threshold,
            accept: lower >= threshold,
        });
    }
    out
}
