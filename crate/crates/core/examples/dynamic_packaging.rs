//! Pick a subset of a corpus matching a requested mix of gender, noise and
//! topic hours, verify it independently, and write it out as a dataset.
//!
//! ```bash
//! cargo run --example dynamic_packaging
//! ```

use std::collections::{BTreeMap, BTreeSet};

use anyhow::Result;
use speech_hitl::corpus::{
    load_corpus, synth_corpus, validate_corpus, CorpusConfig, DatasetName, SynthSpec,
};
use speech_hitl::packaging::{
    emit_dataset, select_subset, verify_package, PackagingOptions, PackagingSpec,
};

fn main() -> Result<()> {
    let corpus = synth_corpus(
        &SynthSpec {
            sessions: 40,
            speakers: 25,
            ..SynthSpec::default()
        },
        21,
    )?;
    let spec = PackagingSpec {
        target_hours: 0.25,
        topics_by_hours: BTreeMap::from([("food".into(), 0.05)]),
        gender_proportion: BTreeMap::from([("female".into(), 0.5), ("male".into(), 0.5)]),
        noise_proportion: BTreeMap::from([
            ("clean".into(), 0.6),
            ("noisy".into(), 0.3),
            ("music".into(), 0.1),
        ]),
        accents: BTreeSet::new(),
        tolerance: 0.05,
        name: DatasetName::commercial("enus", "food", "harbor", "20240612"),
        session_atomic: false,
    };
    println!("{}", serde_json::to_string(&spec)?);

    let r = select_subset(&corpus, &spec, &PackagingOptions::default(), 1)?;
    println!(
        "{:?} picked {} of {} utterances, max deviation {:.4}, satisfied {}",
        r.method,
        r.selected.len(),
        corpus.utterances.len(),
        r.max_deviation,
        r.satisfied()
    );
    let v = verify_package(&r, &corpus, &spec)?;
    for e in &v.entries {
        println!(
            "  {:7} {:8} target {:.3} achieved {:.3}",
            e.axis, e.key, e.target, e.achieved
        );
    }

    let out = tempfile::tempdir()?;
    let manifest = emit_dataset(&r, &corpus, &spec.name, out.path(), false)?;
    println!(
        "emitted {} ({:.3} h, {} speakers)",
        manifest.speechdb_name, manifest.duration_in_hours, manifest.speakers_cnt
    );
    let back = load_corpus(out.path())?;
    println!(
        "emitted dataset violations: {}",
        validate_corpus(&back, &CorpusConfig::default())
            .violations
            .len()
    );
    Ok(())
}
