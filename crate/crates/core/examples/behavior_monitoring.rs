//! Flag annotators from their interaction telemetry: skipped listening,
//! implausibly short dwell, and a rubber-stamp outlier in the population.
//!
//! ```bash
//! cargo run --example behavior_monitoring
//! ```

use std::collections::BTreeMap;

use speech_hitl::pretag::PrelabelMode;
use speech_hitl::qc::{
    apply_flags, monitor_behavior, AnnotatorProfile, BehaviorEvent, BehaviorPolicy,
};

fn session(annotator: &str, coverage: f64, edits: u64, dwell_ms: u64) -> Vec<BehaviorEvent> {
    (0..12)
        .map(|slot| BehaviorEvent {
            assignment_id: format!("{annotator}-a1"),
            slot_index: slot,
            listen_coverage: coverage,
            edit_count: edits + (slot as u64 % 3),
            edit_time_ms: 2000,
            dwell_time_ms: dwell_ms,
            audio_seconds: 6.0,
            mode: PrelabelMode::Assisted,
        })
        .collect()
}

fn main() {
    let mut events = BTreeMap::new();
    for i in 0..25 {
        events.insert(
            format!("ann{i:02}"),
            session(&format!("ann{i:02}"), 1.0, 3, 14_000),
        );
    }
    events.insert("skimmer".to_string(), session("skimmer", 0.4, 3, 14_000));
    events.insert("stamper".to_string(), session("stamper", 1.0, 0, 6_500));

    let flags = monitor_behavior(&events, &BehaviorPolicy::default());
    let mut per_kind: BTreeMap<(String, String), usize> = BTreeMap::new();
    for f in &flags {
        *per_kind
            .entry((f.annotator_id.clone(), format!("{:?}", f.kind)))
            .or_default() += 1;
    }
    for ((who, kind), n) in &per_kind {
        println!("{who:8} {kind:18} x{n}");
    }

    let mut profile = AnnotatorProfile::new("stamper", "en-us");
    apply_flags(&mut profile, &flags);
    println!("stamper flag counts: {:?}", profile.behavior_flags);
}
