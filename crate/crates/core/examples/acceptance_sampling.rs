//! Size an audit sample, draw it, and decide Accept or Rework from the
//! one-sided Wilson lower bound. Small jobs fall back to a full census.
//!
//! ```bash
//! cargo run --example acceptance_sampling
//! ```

use anyhow::Result;
use speech_hitl::qc::{
    assess_census, assess_delivery, draw_sample, plan_sample, sample_can_accept,
};

fn main() -> Result<()> {
    for population in [None, Some(100), Some(5000)] {
        let plan = plan_sample(population, 0.95, 0.05, 0.5)?;
        println!("population {population:?}: audit {}", plan.sample_size);
    }

    let ids: Vec<String> = (0..5000).map(|i| format!("unit{i:04}")).collect();
    let plan = plan_sample(Some(5000), 0.95, 0.05, 0.5)?;
    let sample = draw_sample(&ids, &plan, 42);
    println!("first sampled ids: {:?}", &sample[..4]);

    for failures in [0, 3, 10, 30] {
        let mut results = vec![true; sample.len()];
        results[..failures].fill(false);
        let a = assess_delivery(&results, 0.95)?;
        println!(
            "{failures:2} failures: pass rate {:.3}, lower bound {:.4} -> {:?}",
            a.pass_rate, a.wilson_lower, a.verdict
        );
    }

    // 40 units: even a flawless audit of 37 cannot push the bound past 0.95.
    let small = plan_sample(Some(40), 0.95, 0.05, 0.5)?;
    println!(
        "40 units, sample {}: can certify = {}",
        small.sample_size,
        sample_can_accept(small.sample_size, 0.95)
    );
    let mut census = vec![true; 40];
    census[0] = false;
    println!("census 39/40: {:?}", assess_census(&census, 0.95)?.verdict);
    Ok(())
}
