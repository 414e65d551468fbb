//! Simulate an annotator population against the real service, then run the
//! assisted-versus-scratch comparison that exposes priming.
//!
//! ```bash
//! cargo run --release --example simulate_population
//! ```
//!
//! The printed scenario JSON can be saved and passed to
//! `speech-hitl simulate --scenario`.

use anyhow::Result;
use speech_hitl::pretag::PrelabelMode;
use speech_hitl::sim::{ab_compare, run_scenario, PretagAccuracy, SimAnnotatorParams, SimScenario};

fn main() -> Result<()> {
    let careful = SimAnnotatorParams {
        count: 6,
        assisted_speedup: 2.0,
        priming_bias: 0.1,
        ..SimAnnotatorParams::new(0.95)
    };
    let weak = SimAnnotatorParams {
        listen_discipline: 0.7,
        ..SimAnnotatorParams::new(0.55)
    };
    let mut scenario = SimScenario::new(vec![careful, weak], 17);
    scenario.pretag_accuracy = PretagAccuracy::Uniform {
        low: 0.6,
        high: 1.0,
    };
    println!("{}", serde_json::to_string(&scenario)?);

    let r = run_scenario(&scenario)?;
    println!(
        "{} units, {} assignments, finalized {}, first-pass defects {:.3}, final {:.3}",
        r.units,
        r.assignments,
        r.finalized,
        r.first_pass_defect_rate.unwrap_or(f64::NAN),
        r.final_defect_rate.unwrap_or(f64::NAN)
    );
    for a in &r.removals {
        println!("  removed {a:?}");
    }
    for (mode, t) in &r.timing {
        println!("  {mode}: {:.1} s/unit", t.mean_seconds_per_unit);
    }

    // Same population, forced modes, poor pre-labels.
    let mut assisted = scenario.clone();
    assisted.population.truncate(1);
    assisted.population[0].priming_bias = 0.3;
    assisted.pretag_accuracy = PretagAccuracy::Fixed { value: 0.5 };
    assisted.finalize = false;
    assisted.job.units = 40;
    assisted.job.prelabel_mode = Some(PrelabelMode::Assisted);
    let mut scratch = assisted.clone();
    scratch.job.prelabel_mode = Some(PrelabelMode::FromScratch);
    let c = ab_compare(&assisted, &scratch, 60)?;
    println!(
        "assisted defects {:.3} vs scratch {:.3} (p = {:.2e}), scratch/assisted time {:.2}",
        c.assisted.mean_defect_rate,
        c.scratch.mean_defect_rate,
        c.p_assisted_more_defects,
        c.speed_ratio
    );
    Ok(())
}
