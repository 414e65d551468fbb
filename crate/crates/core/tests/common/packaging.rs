//! Random equal-length pools and an exhaustive optimum over every
//! 10-utterance subset.
//!
//! With every utterance the same length, a subset's distributions depend only
//! on how many utterances of each attribute type it takes, so enumerating
//! per-type count vectors summing to 10 visits every C(30,10) subset's
//! objective value exactly once per distinct outcome.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speech_hitl::corpus::{synth_corpus, Corpus, DatasetName, NoiseBackground, SynthSpec};
use speech_hitl::packaging::PackagingSpec;

pub const POOL: usize = 30;
pub const PICK: usize = 10;
pub const SECONDS: f64 = 15.0;

pub fn pool(seed: u64) -> Corpus {
    let spec = SynthSpec {
        sessions: POOL,
        utterances_per_session: (1, 1),
        speakers: 12,
        duration_seconds: (SECONDS, SECONDS),
        topics: vec!["sports".into(), "news".into()],
        max_topics_per_utterance: 2,
        ..SynthSpec::default()
    };
    synth_corpus(&spec, seed).expect("synthetic pool")
}

pub fn request(seed: u64) -> PackagingSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let male = rng.gen_range(3..=7) as f64 / 10.0;
    let mut cuts = [rng.gen_range(0..=10), rng.gen_range(0..=10)];
    cuts.sort();
    let noise = [cuts[0], cuts[1] - cuts[0], 10 - cuts[1]];
    let mut topics = BTreeMap::new();
    for t in ["sports", "news"] {
        topics.insert(
            t.to_string(),
            rng.gen_range(2..=8) as f64 * SECONDS / 3600.0,
        );
    }
    let mut noise_proportion = BTreeMap::new();
    for (n, k) in NoiseBackground::ALL.iter().zip(noise) {
        noise_proportion.insert(n.as_str().to_string(), k as f64 / 10.0);
    }
    PackagingSpec {
        target_hours: PICK as f64 * SECONDS / 3600.0,
        topics_by_hours: topics,
        gender_proportion: [
            ("male".to_string(), male),
            ("female".to_string(), 1.0 - male),
        ]
        .into_iter()
        .collect(),
        noise_proportion,
        accents: Default::default(),
        tolerance: 0.05,
        name: DatasetName::research("enus", "general", "20240101"),
        session_atomic: false,
    }
}

fn rel(a: f64, t: f64) -> f64 {
    if t > 0.0 {
        (a - t).abs() / t
    } else {
        a.abs()
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Kind {
    gender: String,
    noise: String,
    sports: bool,
    news: bool,
}

/// Best achievable worst-axis deviation over all `PICK`-subsets of the pool.
pub fn brute_force_optimum(corpus: &Corpus, spec: &PackagingSpec) -> f64 {
    let mut kinds: BTreeMap<Kind, usize> = BTreeMap::new();
    for u in corpus.utterances.values() {
        assert_eq!(u.duration_in_seconds, SECONDS);
        let k = Kind {
            gender: u.gender.clone(),
            noise: u.noise_background.as_str().to_string(),
            sports: u.topics.iter().any(|t| t == "sports"),
            news: u.topics.iter().any(|t| t == "news"),
        };
        *kinds.entry(k).or_default() += 1;
    }
    // Every category that can appear, with its requested share (0 if unrequested).
    let mut genders: Vec<(String, f64)> = spec
        .gender_proportion
        .iter()
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    let mut noises: Vec<(String, f64)> = spec
        .noise_proportion
        .iter()
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    for k in kinds.keys() {
        if !genders.iter().any(|(g, _)| *g == k.gender) {
            genders.push((k.gender.clone(), 0.0));
        }
        if !noises.iter().any(|(n, _)| *n == k.noise) {
            noises.push((k.noise.clone(), 0.0));
        }
    }
    struct Item {
        available: usize,
        gender: usize,
        noise: usize,
        sports: bool,
        news: bool,
    }
    let items: Vec<Item> = kinds
        .iter()
        .map(|(k, &available)| Item {
            available,
            gender: genders.iter().position(|(g, _)| *g == k.gender).unwrap(),
            noise: noises.iter().position(|(n, _)| *n == k.noise).unwrap(),
            sports: k.sports,
            news: k.news,
        })
        .collect();
    let sports_target = spec.topics_by_hours.get("sports").copied();
    let news_target = spec.topics_by_hours.get("news").copied();
    let hours_dev = rel(PICK as f64 * SECONDS / 3600.0, spec.target_hours);

    struct State {
        g: Vec<usize>,
        n: Vec<usize>,
        sports: usize,
        news: usize,
        best: f64,
    }
    let mut st = State {
        g: vec![0; genders.len()],
        n: vec![0; noises.len()],
        sports: 0,
        news: 0,
        best: f64::INFINITY,
    };
    let leaf = |st: &State| -> f64 {
        let mut worst = hours_dev;
        if !spec.gender_proportion.is_empty() {
            for (i, (_, want)) in genders.iter().enumerate() {
                worst = worst.max(rel(st.g[i] as f64 / PICK as f64, *want));
            }
        }
        if !spec.noise_proportion.is_empty() {
            for (i, (_, want)) in noises.iter().enumerate() {
                worst = worst.max(rel(st.n[i] as f64 / PICK as f64, *want));
            }
        }
        if let Some(t) = sports_target {
            worst = worst.max(rel(st.sports as f64 * SECONDS / 3600.0, t));
        }
        if let Some(t) = news_target {
            worst = worst.max(rel(st.news as f64 * SECONDS / 3600.0, t));
        }
        worst
    };
    let suffix: Vec<usize> = (0..=items.len())
        .map(|i| items[i..].iter().map(|x| x.available).sum())
        .collect();
    fn rec(
        i: usize,
        left: usize,
        items: &[Item],
        suffix: &[usize],
        st: &mut State,
        leaf: &dyn Fn(&State) -> f64,
    ) {
        if left == 0 {
            let v = leaf(st);
            if v < st.best {
                st.best = v;
            }
            return;
        }
        if i == items.len() || suffix[i] < left {
            return;
        }
        let it = &items[i];
        rec(i + 1, left, items, suffix, st, leaf);
        for c in 1..=it.available.min(left) {
            st.g[it.gender] += 1;
            st.n[it.noise] += 1;
            st.sports += it.sports as usize;
            st.news += it.news as usize;
            rec(i + 1, left - c, items, suffix, st, leaf);
        }
        let taken = it.available.min(left);
        st.g[it.gender] -= taken;
        st.n[it.noise] -= taken;
        st.sports -= if it.sports { taken } else { 0 };
        st.news -= if it.news { taken } else { 0 };
    }
    rec(0, PICK, &items, &suffix, &mut st, &leaf);
    st.best
}

type Shares = BTreeMap<String, f64>;

/// Independent recomputation of achieved distributions for a set of ids:
/// hours, then gender, noise and topic hours.
pub fn recompute(corpus: &Corpus, ids: &[String]) -> (f64, Shares, Shares, Shares) {
    let mut secs = 0.0;
    let mut gender = BTreeMap::new();
    let mut noise = BTreeMap::new();
    let mut topics = BTreeMap::new();
    for id in ids {
        let u = &corpus.utterances[id];
        secs += u.duration_in_seconds;
        *gender.entry(u.gender.clone()).or_insert(0.0) += u.duration_in_seconds / 3600.0;
        *noise
            .entry(u.noise_background.as_str().to_string())
            .or_insert(0.0) += u.duration_in_seconds / 3600.0;
        let mut ts = u.topics.clone();
        ts.sort();
        ts.dedup();
        for t in ts {
            *topics.entry(t).or_insert(0.0) += u.duration_in_seconds / 3600.0;
        }
    }
    (secs / 3600.0, gender, noise, topics)
}
