//! Synthetic speaker clusters with known membership.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::speaker::{SpeakerDb, SpeakerEmbedding, DEFAULT_DIMENSION};

pub const DIM: usize = DEFAULT_DIMENSION;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Member of cluster `c`: cos(t) e_c + sin(t) u with u a random unit vector
/// supported on the coordinates no center uses.
pub fn member(c: usize, rng: &mut impl Rng) -> Vec<f64> {
    let cos_t: f64 = 0.98;
    let sin_t = (1.0 - cos_t * cos_t).sqrt();
    let mut u: Vec<f64> = (0..DIM)
        .map(|i| {
            if i < 10 {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect();
    let n = dot(&u, &u).sqrt();
    u.iter_mut().for_each(|x| *x *= sin_t / n);
    u[c] = cos_t;
    u
}

pub struct Enrollment {
    pub session: String,
    pub cluster: usize,
    pub segments: Vec<(Vec<f64>, f64)>,
}

pub fn plan(seed: u64) -> Vec<Enrollment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for s in 0..60 {
        let cluster = if s < 10 { s } else { rng.gen_range(0..10) };
        let segments = (0..rng.gen_range(1..6))
            .map(|_| (member(cluster, &mut rng), rng.gen_range(1.0..20.0)))
            .collect();
        out.push(Enrollment {
            session: format!("sess{s:03}"),
            cluster,
            segments,
        });
    }
    out[10..].shuffle(&mut rng);
    out
}

pub fn embed(v: &[f64]) -> SpeakerEmbedding {
    SpeakerEmbedding::normalize(v.to_vec()).unwrap()
}

/// Enrolls a plan and checks cluster-to-identity recovery and durations.
/// Returns the database and a description of the first mismatch, if any.
pub fn enroll_plan(p: &[Enrollment], seed: u64) -> (SpeakerDb, Option<String>) {
    let mut db = SpeakerDb::new(DIM, 0.7, seed);
    let mut id_of: std::collections::BTreeMap<usize, String> = Default::default();
    let mut seconds: std::collections::BTreeMap<usize, f64> = Default::default();
    let mut problem = None;
    for e in p {
        let segs: Vec<_> = e.segments.iter().map(|(v, d)| (embed(v), *d)).collect();
        let out = db
            .enroll_session_speaker(&e.session, &segs)
            .expect("enrollment");
        let id = id_of
            .entry(e.cluster)
            .or_insert_with(|| out.speaker_id.clone());
        if *id != out.speaker_id && problem.is_none() {
            problem = Some(format!("cluster {} split across identities", e.cluster));
        }
        *seconds.entry(e.cluster).or_default() += e.segments.iter().map(|s| s.1).sum::<f64>();
    }
    if db.speakers().len() != 10 && problem.is_none() {
        problem = Some(format!("{} identities", db.speakers().len()));
    }
    for (c, id) in &id_of {
        let got = db.get(id).map(|s| s.total_seconds).unwrap_or(-1.0);
        if (got - seconds[c]).abs() > 1e-9 && problem.is_none() {
            problem = Some(format!(
                "cluster {c}: {got} s enrolled, {} s submitted",
                seconds[c]
            ));
        }
    }
    (db, problem)
}
