use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotatorStatus {
    Active,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub annotator_id: String,
    pub locale: String,
    pub qualified: bool,
    pub tq_attempted: u64,
    pub tq_correct: u64,
    pub quality_score: f64,
    pub status: AnnotatorStatus,
    #[serde(default)]
    pub behavior_flags: BTreeMap<String, u64>,
}

impl AnnotatorProfile {
    pub fn new(annotator_id: &str, locale: &str) -> Self {
        AnnotatorProfile {
            annotator_id: annotator_id.to_string(),
            locale: locale.to_string(),
            qualified: false,
            tq_attempted: 0,
            tq_correct: 0,
            quality_score: 1.0,
            status: AnnotatorStatus::Active,
            behavior_flags: BTreeMap::new(),
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == AnnotatorStatus::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalPolicy {
    pub removal_threshold: f64,
    pub min_attempts: u64,
}

impl Default for RemovalPolicy {
    fn default() -> Self {
        RemovalPolicy {
            removal_threshold: 0.80,
            min_attempts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum QcAction {
    RemoveAnnotator { annotator_id: String },
    RecycleWork { annotator_id: String },
}

/// Folds one submission's TQ judgments into the running score. Once enough
/// attempts are in, a score below the threshold removes the annotator.
/// Removal is terminal: later judgments are ignored.
pub fn update_score_and_enforce(
    profile: &AnnotatorProfile,
    judgments: &[bool],
    policy: &RemovalPolicy,
) -> (AnnotatorProfile, Vec<QcAction>) {
    let mut next = profile.clone();
    if !profile.is_active() {
        return (next, Vec::new());
    }
    next.tq_attempted += judgments.len() as u64;
    next.tq_correct += judgments.iter().filter(|&&j| j).count() as u64;
    if next.tq_attempted > 0 {
        next.quality_score = next.tq_correct as f64 / next.tq_attempted as f64;
    }
    let mut actions = Vec::new();
    if next.tq_attempted >= policy.min_attempts && next.quality_score < policy.removal_threshold {
        next.status = AnnotatorStatus::Removed;
        actions.push(QcAction::RemoveAnnotator {
            annotator_id: next.annotator_id.clone(),
        });
        actions.push(QcAction::RecycleWork {
            annotator_id: next.annotator_id.clone(),
        });
    }
    (next, actions)
}
