use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AxisEntry, PackageResult, PackageVerification, PackagingError, PackagingSpec};
use crate::corpus::{Corpus, CorpusError};

/// Achieved totals of a package, in hours.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Achieved {
    pub hours: f64,
    pub gender_hours: BTreeMap<String, f64>,
    pub noise_hours: BTreeMap<String, f64>,
    pub topic_hours: BTreeMap<String, f64>,
}

pub(crate) fn rel_dev(achieved: f64, target: f64) -> f64 {
    if target > 0.0 {
        (achieved - target).abs() / target
    } else {
        achieved.abs()
    }
}

fn proportion_entries(
    axis: &str,
    spec: &BTreeMap<String, f64>,
    hours: &BTreeMap<String, f64>,
    total: f64,
    out: &mut Vec<AxisEntry>,
) {
    if spec.is_empty() {
        return;
    }
    let keys: BTreeSet<&String> = spec.keys().chain(hours.keys()).collect();
    for key in keys {
        let target = spec.get(key).copied().unwrap_or(0.0);
        let h = hours.get(key).copied().unwrap_or(0.0);
        let achieved = if total > 0.0 { h / total } else { 0.0 };
        out.push(AxisEntry {
            axis: axis.to_string(),
            key: key.clone(),
            target,
            achieved,
            deviation: rel_dev(achieved, target),
        });
    }
}

/// Every constrained cell of `spec` against `achieved`.
pub fn deviation_entries(spec: &PackagingSpec, achieved: &Achieved) -> Vec<AxisEntry> {
    let mut out = vec![AxisEntry {
        axis: "hours".into(),
        key: "total".into(),
        target: spec.target_hours,
        achieved: achieved.hours,
        deviation: rel_dev(achieved.hours, spec.target_hours),
    }];
    proportion_entries(
        "gender",
        &spec.gender_proportion,
        &achieved.gender_hours,
        achieved.hours,
        &mut out,
    );
    proportion_entries(
        "noise",
        &spec.noise_proportion,
        &achieved.noise_hours,
        achieved.hours,
        &mut out,
    );
    for (topic, &target) in spec.topics_by_hours.iter() {
        let h = achieved.topic_hours.get(topic).copied().unwrap_or(0.0);
        out.push(AxisEntry {
            axis: "topics".into(),
            key: topic.clone(),
            target,
            achieved: h,
            deviation: rel_dev(h, target),
        });
    }
    out
}

pub(crate) fn summarize(entries: &[AxisEntry]) -> (BTreeMap<String, f64>, f64) {
    let mut by_axis: BTreeMap<String, f64> = BTreeMap::new();
    for e in entries {
        let slot = by_axis.entry(e.axis.clone()).or_insert(0.0);
        *slot = slot.max(e.deviation);
    }
    let max = by_axis.values().copied().fold(0.0, f64::max);
    (by_axis, max)
}

/// Recomputes the package's distributions straight from the utterance
/// records and compares them with the spec.
pub fn verify_package(
    result: &PackageResult,
    corpus: &Corpus,
    spec: &PackagingSpec,
) -> Result<PackageVerification, PackagingError> {
    let mut seconds = 0.0;
    let mut gender: BTreeMap<String, f64> = BTreeMap::new();
    let mut noise: BTreeMap<String, f64> = BTreeMap::new();
    let mut topics: BTreeMap<String, f64> = BTreeMap::new();
    for id in result.selected.iter() {
        let u = corpus
            .utterances
            .get(id)
            .ok_or_else(|| CorpusError::DanglingReference(id.clone()))?;
        let s = u.duration_in_seconds;
        seconds += s;
        *gender.entry(u.gender.clone()).or_default() += s;
        *noise
            .entry(u.noise_background.as_str().to_string())
            .or_default() += s;
        let distinct: BTreeSet<&String> = u.topics.iter().collect();
        for t in distinct {
            *topics.entry(t.clone()).or_default() += s;
        }
    }
    let hours = |m: BTreeMap<String, f64>| m.into_iter().map(|(k, v)| (k, v / 3600.0)).collect();
    let achieved = Achieved {
        hours: seconds / 3600.0,
        gender_hours: hours(gender),
        noise_hours: hours(noise),
        topic_hours: hours(topics),
    };
    let entries = deviation_entries(spec, &achieved);
    let (deviations, max_deviation) = summarize(&entries);
    let satisfied = entries
        .iter()
        .all(|e| e.deviation <= spec.tolerance + 1e-12);
    Ok(PackageVerification {
        deviations,
        entries,
        max_deviation,
        satisfied,
    })
}
