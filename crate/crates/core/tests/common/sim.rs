//! Scenarios and closed-form oracles for the simulator.

use speech_hitl::orchestrator::UnitState;
use speech_hitl::pretag::PrelabelMode;
use speech_hitl::qc::AnnotatorStatus;
use speech_hitl::sim::{PretagAccuracy, SimAnnotatorParams, SimScenario, Simulation};

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that an annotator answering `k` test questions per assignment
/// correctly with probability `p` is removed within `horizon` assignments,
/// checked after every assignment once `min_attempts` is reached.
pub fn removal_probability(p: f64, k: u64, horizon: u64, min_attempts: u64, threshold: f64) -> f64 {
    // alive[c] = probability of still being active with c correct answers.
    let mut alive = vec![1.0];
    let mut removed = 0.0;
    for round in 1..=horizon {
        let mut next = vec![0.0; alive.len() + k as usize];
        for (c, mass) in alive.iter().enumerate() {
            for j in 0..=k {
                next[c + j as usize] +=
                    mass * choose(k, j) * p.powi(j as i32) * (1.0 - p).powi((k - j) as i32);
            }
        }
        let attempts = round * k;
        if attempts >= min_attempts {
            for (c, mass) in next.iter_mut().enumerate() {
                if (c as f64) / (attempts as f64) < threshold {
                    removed += *mass;
                    *mass = 0.0;
                }
            }
        }
        alive = next;
    }
    removed
}

/// One annotator at TQ accuracy 0.6 doing three assignments of 10 + 2.
pub fn removal_scenario(seed: u64) -> SimScenario {
    let mut s = SimScenario::new(vec![SimAnnotatorParams::new(0.6)], seed);
    s.horizon = 3;
    s.finalize = false;
    s.job.units = 30;
    s.job.tq_pool_size = 6;
    s
}

pub struct RemovalTally {
    pub runs: usize,
    pub removed: usize,
    /// Units answered only by removed annotators that were not put back in
    /// the queue.
    pub stranded: usize,
    pub sole_units: usize,
}

pub fn removal_tally(runs: usize, base_seed: u64) -> RemovalTally {
    let mut t = RemovalTally {
        runs,
        removed: 0,
        stranded: 0,
        sole_units: 0,
    };
    for r in 0..runs {
        let mut sim =
            Simulation::new(&removal_scenario(base_seed + r as u64)).expect("valid scenario");
        let report = sim.run().expect("scenario runs");
        t.removed += report.removals.len();
        let st = sim.orchestrator().state();
        for unit in st.units.values() {
            let answered_by: Vec<&str> = st
                .answers
                .iter()
                .filter(|a| a.unit_id == unit.unit_id)
                .map(|a| a.annotator_id.as_str())
                .collect();
            let sole = !answered_by.is_empty()
                && answered_by
                    .iter()
                    .all(|a| st.annotators[*a].status == AnnotatorStatus::Removed);
            if sole {
                t.sole_units += 1;
                if unit.state != UnitState::Queued || unit.accepted.is_some() {
                    t.stranded += 1;
                }
            }
        }
    }
    t
}

/// Ten careful annotators; the arms differ only in the forced mode.
pub fn ab_arms(pretag: f64, priming: f64, seed: u64) -> (SimScenario, SimScenario) {
    let mut p = SimAnnotatorParams::new(0.95);
    p.priming_bias = priming;
    p.assisted_speedup = 2.12;
    p.count = 5;
    let mut s = SimScenario::new(vec![p], seed);
    s.pretag_accuracy = PretagAccuracy::Fixed { value: pretag };
    s.job.units = 40;
    s.job.tq_pool_size = 100;
    s.finalize = false;
    let mut a = s.clone();
    a.job.prelabel_mode = Some(PrelabelMode::Assisted);
    let mut b = s;
    b.job.prelabel_mode = Some(PrelabelMode::FromScratch);
    (a, b)
}
