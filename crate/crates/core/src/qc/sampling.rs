use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::QcError;

/// Standard normal 0.95 quantile.
pub const ONE_SIDED_95_Z: f64 = 1.644_853_626_951_472_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// `None` for an unbounded population.
    pub population_size: Option<u64>,
    pub confidence: f64,
    pub margin: f64,
    pub assumed_proportion: f64,
    pub sample_size: u64,
}

fn two_sided_z(confidence: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 + confidence / 2.0)
}

/// Cochran sample size with finite-population correction, rounded up and
/// clamped to `[1, N]`.
pub fn plan_sample(
    population: Option<u64>,
    confidence: f64,
    margin: f64,
    p: f64,
) -> Result<SamplingPlan, QcError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(QcError::InvalidParameter(format!(
            "confidence {confidence}"
        )));
    }
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(QcError::InvalidParameter(format!("margin {margin}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(QcError::InvalidParameter(format!("proportion {p}")));
    }
    if population == Some(0) {
        return Err(QcError::InvalidParameter("empty population".into()));
    }
    let z = two_sided_z(confidence);
    let n0 = z * z * p * (1.0 - p) / (margin * margin);
    let n = match population {
        Some(big_n) => n0 / (1.0 + (n0 - 1.0) / big_n as f64),
        None => n0,
    };
    // Guard against float noise pushing an exact integer over.
    let mut size = (n - 1e-9).ceil().max(1.0) as u64;
    if let Some(big_n) = population {
        size = size.min(big_n);
    }
    Ok(SamplingPlan {
        population_size: population,
        confidence,
        margin,
        assumed_proportion: p,
        sample_size: size,
    })
}

/// Uniform sample of `plan.sample_size` ids, returned in input order.
pub fn draw_sample(ids: &[String], plan: &SamplingPlan, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (plan.sample_size as usize).min(ids.len());
    let mut picked = index::sample(&mut rng, ids.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| ids[i].clone()).collect()
}

/// Wilson score interval `(lower, upper)` for `passed` of `n` at normal
/// quantile `z`.
pub fn wilson_bounds(passed: u64, n: u64, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = passed as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = p + z2 / (2.0 * n_f);
    let spread = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    (
        ((center - spread) / denom).max(0.0),
        ((center + spread) / denom).min(1.0),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum QaVerdict {
    Accept,
    Rework { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaAssessment {
    #[serde(flatten)]
    pub verdict: QaVerdict,
    pub audited: u64,
    pub passed: u64,
    pub pass_rate: f64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    pub threshold: f64,
}

/// Accepts when the one-sided 95% Wilson lower bound on the pass rate
/// reaches `threshold`; otherwise asks to rework the observed defect share.
pub fn assess_delivery(results: &[bool], threshold: f64) -> Result<QaAssessment, QcError> {
    if results.is_empty() {
        return Err(QcError::EmptyAudit);
    }
    let n = results.len() as u64;
    let passed = results.iter().filter(|&&r| r).count() as u64;
    let (lower, upper) = wilson_bounds(passed, n, ONE_SIDED_95_Z);
    let pass_rate = passed as f64 / n as f64;
    let verdict = if lower >= threshold {
        QaVerdict::Accept
    } else {
        QaVerdict::Rework {
            fraction: 1.0 - pass_rate,
        }
    };
    Ok(QaAssessment {
        verdict,
        audited: n,
        passed,
        pass_rate,
        wilson_lower: lower,
        wilson_upper: upper,
        threshold,
    })
}

/// Whether a flawless audit of `n` items can clear `threshold` at all.
pub fn sample_can_accept(n: u64, threshold: f64) -> bool {
    n > 0 && wilson_bounds(n, n, ONE_SIDED_95_Z).0 >= threshold
}

/// Verdict for an audit of every item: the pass rate is exact, so it is
/// compared with the threshold directly.
pub fn assess_census(results: &[bool], threshold: f64) -> Result<QaAssessment, QcError> {
    let mut a = assess_delivery(results, threshold)?;
    a.verdict = if a.pass_rate >= threshold {
        QaVerdict::Accept
    } else {
        QaVerdict::Rework {
            fraction: 1.0 - a.pass_rate,
        }
    };
    Ok(a)
}
