use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{run_scenario, SimError, SimReport, SimScenario};
use crate::pretag::PrelabelMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub runs: usize,
    pub mean_defect_rate: f64,
    pub sd_defect_rate: f64,
    pub mean_seconds_per_unit: f64,
    pub units_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbComparison {
    pub runs: usize,
    pub assisted: ArmSummary,
    pub scratch: ArmSummary,
    /// Assisted minus scratch first-pass defect rate.
    pub defect_delta: f64,
    /// Scratch over assisted mean time per unit; above 1 means assisted is faster.
    pub speed_ratio: f64,
    /// One-sided Welch t-test of "assisted has more defects".
    pub t_statistic: f64,
    pub p_assisted_more_defects: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Upper-tail Welch t-test for mean(a) > mean(b).
fn welch_upper(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let va = sa * sa / na;
    let vb = sb * sb / nb;
    let se = (va + vb).sqrt();
    if se == 0.0 {
        let t = (ma - mb).signum() * f64::INFINITY;
        let p = if ma > mb {
            0.0
        } else if ma < mb {
            1.0
        } else {
            0.5
        };
        return (if ma == mb { 0.0 } else { t }, p);
    }
    let t = (ma - mb) / se;
    let df = (va + vb).powi(2) / (va * va / (na - 1.0).max(1.0) + vb * vb / (nb - 1.0).max(1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (t, 1.0 - dist.cdf(t))
}

fn summarize(reports: &[SimReport], mode: PrelabelMode) -> ArmSummary {
    let defects: Vec<f64> = reports
        .iter()
        .map(|r| r.first_pass_defect_rate.unwrap_or(0.0))
        .collect();
    let (m, sd) = mean_sd(&defects);
    let times: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.mean_seconds(mode))
        .collect();
    let t = if times.is_empty() {
        0.0
    } else {
        times.iter().sum::<f64>() / times.len() as f64
    };
    ArmSummary {
        runs: reports.len(),
        mean_defect_rate: m,
        sd_defect_rate: sd,
        mean_seconds_per_unit: t,
        units_per_hour: if t > 0.0 { 3600.0 / t } else { 0.0 },
    }
}

fn run_many(base: &SimScenario, runs: usize) -> Result<Vec<SimReport>, SimError> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SimReport, SimError>>>> =
        Mutex::new((0..runs).map(|_| None).collect());
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(runs.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::SeqCst);
                if r >= runs {
                    break;
                }
                let mut s = base.clone();
                s.rng_seed = base.rng_seed.wrapping_add(r as u64);
                let out = run_scenario(&s);
                slots.lock().expect("slots")[r] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("slots")
        .into_iter()
        .map(|s| s.expect("every run filled"))
        .collect()
}

/// Runs both arms over `runs` paired seeds (`rng_seed`, `rng_seed + 1`, ...)
/// and compares first-pass defect rates and time per unit.
pub fn ab_compare(
    assisted: &SimScenario,
    scratch: &SimScenario,
    runs: usize,
) -> Result<AbComparison, SimError> {
    if assisted.job.prelabel_mode != Some(PrelabelMode::Assisted)
        || scratch.job.prelabel_mode != Some(PrelabelMode::FromScratch)
    {
        return Err(SimError::InvalidScenario(
            "arms must force assisted and from-scratch modes respectively".into(),
        ));
    }
    let mut a = assisted.clone();
    let mut b = scratch.clone();
    a.job.prelabel_mode = None;
    b.job.prelabel_mode = None;
    if a != b {
        return Err(SimError::InvalidScenario(
            "arms may differ only in prelabel mode".into(),
        ));
    }
    if runs == 0 {
        return Err(SimError::InvalidScenario("need at least one run".into()));
    }
    let ra = run_many(assisted, runs)?;
    let rb = run_many(scratch, runs)?;
    let sa = summarize(&ra, PrelabelMode::Assisted);
    let sb = summarize(&rb, PrelabelMode::FromScratch);
    let da: Vec<f64> = ra
        .iter()
        .map(|r| r.first_pass_defect_rate.unwrap_or(0.0))
        .collect();
    let db: Vec<f64> = rb
        .iter()
        .map(|r| r.first_pass_defect_rate.unwrap_or(0.0))
        .collect();
    let (t, p) = welch_upper(&da, &db);
    Ok(AbComparison {
        runs,
        defect_delta: sa.mean_defect_rate - sb.mean_defect_rate,
        speed_ratio: if sa.mean_seconds_per_unit > 0.0 {
            sb.mean_seconds_per_unit / sa.mean_seconds_per_unit
        } else {
            0.0
        },
        t_statistic: t,
        p_assisted_more_defects: p,
        assisted: sa,
        scratch: sb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_matches_hand_computation() {
        // means 3 and 2, variances 2.5 and 2.5, n = 5: t = 1 / sqrt(1) = 1, df = 8
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0, 1.0, 2.0, 3.0, 4.0];
        let (t, p) = welch_upper(&a, &b);
        assert!((t - 1.0).abs() < 1e-12);
        // upper tail of t(8) at 1.0
        assert!((p - 0.173_296_2).abs() < 1e-6, "{p}");
    }
}
