//! Load the sample metadata, validate it, then break two invariants on a
//! synthetic corpus and watch the validator report them.
//!
//! ```bash
//! cargo run --example validate_corpus
//! ```

use std::path::Path;

use anyhow::Result;
use speech_hitl::corpus::{
    aggregate_stats, load_corpus, synth_corpus, validate_corpus, CorpusConfig, SynthSpec,
};

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/appendix");
    let corpus = load_corpus(&dir)?;
    let report = validate_corpus(&corpus, &CorpusConfig::default());
    println!(
        "{}: {} session(s), {} utterance(s), {} violation(s)",
        corpus.manifest.speechdb_name,
        corpus.sessions.len(),
        corpus.utterances.len(),
        report.violations.len()
    );

    let mut synth = synth_corpus(&SynthSpec::default(), 7)?;
    let stats = aggregate_stats(&synth)?;
    println!(
        "synthetic corpus: {:.2} h over {} speakers",
        stats.duration_in_hours, stats.speakers_cnt
    );

    // One clip over 20 s, one speaker declared over 60 minutes.
    let long = synth.utterances.keys().next().unwrap().clone();
    synth.utterances.get_mut(&long).unwrap().duration_in_seconds = 24.5;
    let speaker = synth.speakers.keys().next().unwrap().clone();
    synth
        .speakers
        .get_mut(&speaker)
        .unwrap()
        .duration_in_minutes = 61.0;

    for v in validate_corpus(&synth, &CorpusConfig::default()).violations {
        println!("  {:?} {} {}", v.invariant, v.record_id, v.details);
    }
    Ok(())
}
