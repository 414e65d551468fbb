use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnnotatorProfile;
use crate::pretag::PrelabelMode;

/// Per-slot interaction signals reported by the workbench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEvent {
    pub assignment_id: String,
    pub slot_index: usize,
    pub listen_coverage: f64,
    pub edit_count: u64,
    pub edit_time_ms: u64,
    pub dwell_time_ms: u64,
    /// Clip length, used to scale dwell time.
    #[serde(default)]
    pub audio_seconds: f64,
    #[serde(default = "default_mode")]
    pub mode: PrelabelMode,
}

fn default_mode() -> PrelabelMode {
    PrelabelMode::Assisted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorPolicy {
    pub min_listen_coverage: f64,
    pub min_dwell_per_audio_second_ms: f64,
    /// Longest allowed run of unedited assisted slots; 0 turns the check off.
    pub max_zero_edit_streak: usize,
    pub z_threshold: f64,
    /// Population-based flags stay off below this many annotators.
    pub min_population: usize,
    pub require_full_listen_in_scratch: bool,
}

impl Default for BehaviorPolicy {
    fn default() -> Self {
        BehaviorPolicy {
            min_listen_coverage: 0.98,
            min_dwell_per_audio_second_ms: 800.0,
            max_zero_edit_streak: 0,
            z_threshold: 3.0,
            min_population: 20,
            require_full_listen_in_scratch: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlagKind {
    ListenIncomplete,
    LowEditCount,
    LowDwell,
    ZeroEditStreak,
    DwellBelowMinimum,
}

impl FlagKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagKind::ListenIncomplete => "LISTEN_INCOMPLETE",
            FlagKind::LowEditCount => "LOW_EDIT_COUNT",
            FlagKind::LowDwell => "LOW_DWELL",
            FlagKind::ZeroEditStreak => "ZERO_EDIT_STREAK",
            FlagKind::DwellBelowMinimum => "DWELL_BELOW_MINIMUM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorFlag {
    pub annotator_id: String,
    pub kind: FlagKind,
    pub severity: Severity,
    pub assignment_id: Option<String>,
    pub slot_index: Option<usize>,
    pub detail: String,
}

fn dwell_rate(e: &BehaviorEvent) -> Option<f64> {
    (e.audio_seconds > 0.0).then(|| e.dwell_time_ms as f64 / e.audio_seconds)
}

/// Leave-one-out z-score of `values[i]` against the rest of the population.
fn loo_z(values: &[f64], i: usize) -> f64 {
    let others: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .collect();
    let n = others.len() as f64;
    let mean = others.iter().sum::<f64>() / n;
    let var = others.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let diff = values[i] - mean;
    if sd == 0.0 {
        return if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
    }
    diff / sd
}

/// Scans each annotator's events (in submission order) and returns flags
/// sorted by annotator, kind and slot.
pub fn monitor_behavior(
    events: &BTreeMap<String, Vec<BehaviorEvent>>,
    policy: &BehaviorPolicy,
) -> Vec<BehaviorFlag> {
    let mut flags = Vec::new();
    for (annotator, list) in events {
        let mut streak = 0usize;
        let mut longest = 0usize;
        let mut short_dwell = 0usize;
        for e in list {
            let assisted = e.mode == PrelabelMode::Assisted;
            if (assisted || policy.require_full_listen_in_scratch)
                && e.listen_coverage < policy.min_listen_coverage
            {
                flags.push(BehaviorFlag {
                    annotator_id: annotator.clone(),
                    kind: FlagKind::ListenIncomplete,
                    severity: Severity::Hard,
                    assignment_id: Some(e.assignment_id.clone()),
                    slot_index: Some(e.slot_index),
                    detail: format!("listen coverage {:.2}", e.listen_coverage),
                });
            }
            if assisted {
                if e.edit_count == 0 {
                    streak += 1;
                    longest = longest.max(streak);
                } else {
                    streak = 0;
                }
            }
            if dwell_rate(e).is_some_and(|r| r < policy.min_dwell_per_audio_second_ms) {
                short_dwell += 1;
            }
        }
        if policy.max_zero_edit_streak > 0 && longest > policy.max_zero_edit_streak {
            flags.push(soft(
                annotator,
                FlagKind::ZeroEditStreak,
                format!("{longest} consecutive unedited assisted slots"),
            ));
        }
        if short_dwell > 0 {
            flags.push(soft(
                annotator,
                FlagKind::DwellBelowMinimum,
                format!("{short_dwell} slots below minimum dwell"),
            ));
        }
    }

    if events.len() >= policy.min_population {
        let ids: Vec<&String> = events.keys().collect();
        let stat = |f: &dyn Fn(&BehaviorEvent) -> Option<f64>| -> Vec<Option<f64>> {
            events
                .values()
                .map(|list| {
                    let vals: Vec<f64> = list.iter().filter_map(f).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect()
        };
        let edits = stat(&|e| (e.mode == PrelabelMode::Assisted).then_some(e.edit_count as f64));
        let dwell = stat(&dwell_rate);
        for (kind, column) in [(FlagKind::LowEditCount, edits), (FlagKind::LowDwell, dwell)] {
            let present: Vec<(usize, f64)> = column
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|v| (i, v)))
                .collect();
            if present.len() < policy.min_population {
                continue;
            }
            let values: Vec<f64> = present.iter().map(|&(_, v)| v).collect();
            for (k, &(i, v)) in present.iter().enumerate() {
                let z = loo_z(&values, k);
                if z < -policy.z_threshold {
                    flags.push(soft(ids[i], kind, format!("mean {v:.2}, z {z:.2}")));
                }
            }
        }
    }

    flags.sort_by(|a, b| {
        (&a.annotator_id, a.kind, &a.assignment_id, a.slot_index).cmp(&(
            &b.annotator_id,
            b.kind,
            &b.assignment_id,
            b.slot_index,
        ))
    });
    flags
}

fn soft(annotator: &str, kind: FlagKind, detail: String) -> BehaviorFlag {
    BehaviorFlag {
        annotator_id: annotator.to_string(),
        kind,
        severity: Severity::Soft,
        assignment_id: None,
        slot_index: None,
        detail,
    }
}

/// Adds each flag belonging to `profile` to its counter map.
pub fn apply_flags(profile: &mut AnnotatorProfile, flags: &[BehaviorFlag]) {
    for f in flags
        .iter()
        .filter(|f| f.annotator_id == profile.annotator_id)
    {
        *profile
            .behavior_flags
            .entry(f.kind.as_str().to_string())
            .or_default() += 1;
    }
}
