use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QcError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerKind {
    Transcription,
    Label,
}

/// What an annotator sees for one slot. Regular units and test questions
/// share this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkItemPayload {
    pub kind: AnswerKind,
    pub audio_path: String,
    pub duration_seconds: f64,
    /// Machine pre-label shown in assisted mode.
    pub prelabel: Option<String>,
}

/// A hidden gold question. Serialized as the unit payload plus the answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestQuestion {
    pub tq_id: String,
    #[serde(flatten)]
    pub payload: WorkItemPayload,
    pub ground_truth: String,
    pub verified_by: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "ref", content = "id", rename_all = "snake_case")]
pub enum ItemRef {
    Unit(String),
    TestQuestion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentItem {
    pub slot_index: usize,
    pub item: ItemRef,
    /// Opaque per-slot token handed to the annotator.
    pub token: String,
    pub payload: WorkItemPayload,
}

impl AssignmentItem {
    pub fn is_tq(&self) -> bool {
        matches!(self.item, ItemRef::TestQuestion(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub assignment_id: String,
    pub annotator_id: String,
    pub items: Vec<AssignmentItem>,
    /// Milliseconds since the epoch.
    pub lease_expiry: u64,
}

/// Annotator-facing slot: no hint of whether it is a test question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotView {
    pub slot_index: usize,
    pub token: String,
    #[serde(flatten)]
    pub payload: WorkItemPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorView {
    pub assignment_id: String,
    pub lease_expiry: u64,
    pub slots: Vec<SlotView>,
}

impl Assignment {
    pub fn tq_count(&self) -> usize {
        self.items.iter().filter(|i| i.is_tq()).count()
    }

    pub fn annotator_view(&self) -> AnnotatorView {
        AnnotatorView {
            assignment_id: self.assignment_id.clone(),
            lease_expiry: self.lease_expiry,
            slots: self
                .items
                .iter()
                .map(|i| SlotView {
                    slot_index: i.slot_index,
                    token: i.token.clone(),
                    payload: i.payload.clone(),
                })
                .collect(),
        }
    }

    pub fn unit_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().filter_map(|i| match &i.item {
            ItemRef::Unit(id) => Some(id.as_str()),
            ItemRef::TestQuestion(_) => None,
        })
    }
}

/// Bundles `units` with `k` unused test questions in a uniformly random slot
/// order.
///
/// Test questions already shown to this annotator (`used_tqs`) are never
/// reused; if fewer than `k` remain the call fails.
pub fn build_assignment(
    assignment_id: &str,
    annotator_id: &str,
    units: &[(String, WorkItemPayload)],
    tq_pool: &[TestQuestion],
    k: usize,
    used_tqs: &BTreeSet<String>,
    rng_seed: u64,
) -> Result<Assignment, QcError> {
    if units.is_empty() {
        return Err(QcError::EmptyUnits);
    }
    let available: Vec<&TestQuestion> = tq_pool
        .iter()
        .filter(|t| !used_tqs.contains(&t.tq_id))
        .collect();
    if available.len() < k {
        return Err(QcError::TqPoolExhausted(annotator_id.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut entries: Vec<(ItemRef, WorkItemPayload)> = units
        .iter()
        .map(|(id, p)| (ItemRef::Unit(id.clone()), p.clone()))
        .collect();
    let mut picked = index::sample(&mut rng, available.len(), k).into_vec();
    picked.sort_unstable();
    for i in picked {
        let tq = available[i];
        entries.push((ItemRef::TestQuestion(tq.tq_id.clone()), tq.payload.clone()));
    }
    entries.shuffle(&mut rng);
    let items = entries
        .into_iter()
        .enumerate()
        .map(|(slot_index, (item, payload))| AssignmentItem {
            slot_index,
            item,
            token: format!("{:016x}", rng.gen::<u64>()),
            payload,
        })
        .collect();
    Ok(Assignment {
        assignment_id: assignment_id.to_string(),
        annotator_id: annotator_id.to_string(),
        items,
        lease_expiry: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn payload(i: usize) -> WorkItemPayload {
        WorkItemPayload {
            kind: AnswerKind::Transcription,
            audio_path: format!("/audio/{i}.wav"),
            duration_seconds: 5.0,
            prelabel: Some("hello world".into()),
        }
    }

    fn units(n: usize) -> Vec<(String, WorkItemPayload)> {
        (0..n).map(|i| (format!("u{i}"), payload(i))).collect()
    }

    fn pool(n: usize) -> Vec<TestQuestion> {
        (0..n)
            .map(|i| TestQuestion {
                tq_id: format!("tq{i}"),
                payload: payload(100 + i),
                ground_truth: "hello world".into(),
                verified_by: "checker".into(),
            })
            .collect()
    }

    #[test]
    fn ten_units_two_tqs() {
        let a = build_assignment("a", "ann", &units(10), &pool(5), 2, &BTreeSet::new(), 7).unwrap();
        assert_eq!(a.items.len(), 12);
        assert_eq!(a.tq_count(), 2);
        let slots: Vec<_> = a.items.iter().map(|i| i.slot_index).collect();
        assert_eq!(slots, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn no_tqs_is_a_shuffle_of_units() {
        let u = units(10);
        let a = build_assignment("a", "ann", &u, &[], 0, &BTreeSet::new(), 3).unwrap();
        let mut ids: Vec<_> = a.unit_ids().map(str::to_string).collect();
        ids.sort();
        let mut expected: Vec<_> = u.iter().map(|(id, _)| id.clone()).collect();
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn used_tqs_are_not_reused() {
        let used: BTreeSet<String> = ["tq0", "tq1", "tq2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let a = build_assignment("a", "ann", &units(3), &pool(5), 2, &used, 1).unwrap();
        for i in a.items.iter() {
            if let ItemRef::TestQuestion(id) = &i.item {
                assert!(!used.contains(id));
            }
        }
        let err = build_assignment("a", "ann", &units(3), &pool(4), 2, &used, 1).unwrap_err();
        assert_eq!(err, QcError::TqPoolExhausted("ann".into()));
    }

    #[test]
    fn view_hides_the_flag() {
        let a = build_assignment("a", "ann", &units(4), &pool(2), 2, &BTreeSet::new(), 11).unwrap();
        let json = serde_json::to_string(&a.annotator_view()).unwrap();
        assert!(!json.contains("tq"));
        assert!(!json.contains("test_question"));
        assert!(!json.contains("\"u0\""));
    }
}
