use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One accepted (non-TQ) answer. `seq` orders answers in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedAnswer {
    pub unit_id: String,
    pub annotator_id: String,
    pub seq: u64,
}

/// Units to send back to the queue after `removed` is dropped: those whose
/// latest accepted answer came from `removed` and that carry no accepted
/// answer from an annotator still active. Sorted by unit id.
pub fn recycle_units(
    removed: &str,
    answers: &[AcceptedAnswer],
    is_active: impl Fn(&str) -> bool,
) -> Vec<String> {
    let mut by_unit: BTreeMap<&str, Vec<&AcceptedAnswer>> = BTreeMap::new();
    for a in answers {
        by_unit.entry(a.unit_id.as_str()).or_default().push(a);
    }
    by_unit
        .into_iter()
        .filter(|(_, list)| {
            let latest = list.iter().max_by_key(|a| a.seq).expect("non-empty");
            latest.annotator_id == removed
                && !list
                    .iter()
                    .any(|a| a.annotator_id != removed && is_active(&a.annotator_id))
        })
        .map(|(unit, _)| unit.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ans(unit: &str, who: &str, seq: u64) -> AcceptedAnswer {
        AcceptedAnswer {
            unit_id: unit.into(),
            annotator_id: who.into(),
            seq,
        }
    }

    #[test]
    fn selection() {
        let answers = vec![
            ans("u1", "bad", 1),
            ans("u2", "bad", 2),
            ans("u2", "good", 3),
            ans("u3", "good", 4),
            ans("u3", "bad", 5),
            ans("u4", "gone", 6),
            ans("u4", "bad", 7),
        ];
        let active = |id: &str| id == "good";
        assert_eq!(recycle_units("bad", &answers, active), vec!["u1", "u4"]);
    }

    #[test]
    fn empty() {
        assert!(recycle_units("x", &[], |_| true).is_empty());
    }
}
