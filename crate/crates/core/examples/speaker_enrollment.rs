//! Enroll per-session speaker embeddings into the anonymized database, then
//! rebuild it from its event log.
//!
//! ```bash
//! cargo run --example speaker_enrollment
//! ```

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::speaker::{SpeakerDb, SpeakerEmbedding, DEFAULT_DIMENSION};

/// A voice near axis `who`, with a little noise.
fn voice(who: usize, rng: &mut ChaCha8Rng) -> Result<SpeakerEmbedding> {
    let mut v: Vec<f64> = (0..DEFAULT_DIMENSION)
        .map(|_| rng.gen_range(-0.05..0.05))
        .collect();
    v[who] += 1.0;
    Ok(SpeakerEmbedding::normalize(v)?)
}

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut db = SpeakerDb::new(DEFAULT_DIMENSION, 0.7, 3);

    // Three people across five sessions; person 0 shows up three times.
    for (session, who) in ["s1", "s2", "s3", "s4", "s5"]
        .into_iter()
        .zip([0, 1, 0, 2, 0])
    {
        let segments = vec![(voice(who, &mut rng)?, 12.0), (voice(who, &mut rng)?, 8.5)];
        let out = db.enroll_session_speaker(session, &segments)?;
        let verdict = match &out.decision.matched {
            Some(_) => "matched",
            None => "new",
        };
        println!(
            "{session}: {verdict:7} {} (score {:.3})",
            out.speaker_id, out.decision.score
        );
    }
    for s in db.speakers().values() {
        println!(
            "{} {:.2} min over {} session(s)",
            s.speaker_id,
            s.total_duration_minutes(),
            s.session_ids.len()
        );
    }

    let dir = tempfile::tempdir()?;
    let log = dir.path().join("enrollment.jsonl");
    db.write_log(&log)?;
    let events = SpeakerDb::read_log(&log)?;
    let rebuilt = SpeakerDb::replay(DEFAULT_DIMENSION, 0.7, 0, &events)?;
    println!(
        "replayed {} events, identical snapshot: {}",
        events.len(),
        rebuilt.snapshot_json() == db.snapshot_json()
    );
    Ok(())
}
