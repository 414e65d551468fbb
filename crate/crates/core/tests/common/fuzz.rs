//! Corpus fuzzer: a valid synthetic corpus with duration violations planted
//! at known places, plus near misses that must stay silent.

use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::corpus::{synth_corpus, Corpus, Invariant, SynthSpec};

pub type Plants = BTreeSet<(Invariant, String)>;

pub fn small_spec() -> SynthSpec {
    SynthSpec {
        sessions: 6,
        utterances_per_session: (2, 8),
        speakers: 5,
        ..SynthSpec::default()
    }
}

pub fn fuzz_corpus(seed: u64) -> (Corpus, Plants) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut c = synth_corpus(&small_spec(), seed).expect("synthetic corpus");
    let mut plants = Plants::new();
    let mut touched = BTreeSet::new();

    for _ in 0..rng.gen_range(0..=3) {
        let id = c.utterances.keys().choose(&mut rng).unwrap().clone();
        if !touched.insert(id.clone()) {
            continue;
        }
        let u = c.utterances.get_mut(&id).unwrap();
        match rng.gen_range(0..4) {
            0 => u.duration_in_seconds = 20.0 + 1e-9,
            1 => u.duration_in_seconds = 25.0,
            2 => u.duration_in_seconds = rng.gen_range(20.001..120.0),
            // near miss
            _ => {
                u.duration_in_seconds = 20.0;
                continue;
            }
        }
        plants.insert((Invariant::UtteranceTooLong, id));
    }

    for _ in 0..rng.gen_range(0..=2) {
        let sid = c.speakers.keys().choose(&mut rng).unwrap().clone();
        if !touched.insert(sid.clone()) {
            continue;
        }
        match rng.gen_range(0..4) {
            0 => c.speakers.get_mut(&sid).unwrap().duration_in_minutes = 60.0,
            1 => c.speakers.get_mut(&sid).unwrap().duration_in_minutes = rng.gen_range(60.0..600.0),
            2 => {
                // Real talk time past the cap: 186 clips of 19.5 s is 60.45 min.
                let template = c
                    .utterances
                    .values()
                    .find(|u| u.speaker_id == sid)
                    .cloned()
                    .unwrap_or_else(|| c.utterances.values().next().unwrap().clone());
                let session = template.session_id.clone();
                for i in 0..186 {
                    let mut u = template.clone();
                    u.utterance_id = format!("{sid}-extra{i:03}");
                    u.speaker_id = sid.clone();
                    u.duration_in_seconds = 19.5;
                    c.sessions
                        .get_mut(&session)
                        .unwrap()
                        .utterance_ids_list
                        .push(u.utterance_id.clone());
                    c.speakers
                        .get_mut(&sid)
                        .unwrap()
                        .utterance_ids_list
                        .push(u.utterance_id.clone());
                    c.utterances.insert(u.utterance_id.clone(), u);
                }
            }
            _ => {
                c.speakers.get_mut(&sid).unwrap().duration_in_minutes = 59.99;
                continue;
            }
        }
        plants.insert((Invariant::SpeakerCapExceeded, sid));
    }
    (c, plants)
}

pub fn reported(report: &speech_hitl::corpus::ValidationReport) -> Plants {
    report
        .violations
        .iter()
        .filter(|v| {
            matches!(
                v.invariant,
                Invariant::UtteranceTooLong | Invariant::SpeakerCapExceeded
            )
        })
        .map(|v| (v.invariant, v.record_id.clone()))
        .collect()
}
