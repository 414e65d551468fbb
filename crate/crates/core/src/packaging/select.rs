use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::verify::{rel_dev, summarize};
use super::{
    deviation_entries, Achieved, PackageResult, PackagingError, PackagingOptions, PackagingSpec,
    SelectionMethod,
};
use crate::corpus::{Corpus, UtteranceRecord};

const EPS: f64 = 1e-12;

/// A unit of selection: one utterance, or one session in session-atomic mode.
/// Contributions are in hours.
#[derive(Debug, Clone)]
struct Group {
    ids: Vec<String>,
    hours: f64,
    gender: Vec<(usize, f64)>,
    noise: Vec<(usize, f64)>,
    topics: Vec<(usize, f64)>,
    speakers: Vec<(usize, f64)>,
}

struct Model {
    groups: Vec<Group>,
    target_hours: f64,
    gender_keys: Vec<String>,
    gender_target: Option<Vec<f64>>,
    noise_keys: Vec<String>,
    noise_target: Option<Vec<f64>>,
    topic_keys: Vec<String>,
    topic_target: Vec<f64>,
    speaker_keys: Vec<String>,
}

#[derive(Debug, Clone)]
struct Tally {
    hours: f64,
    gender: Vec<f64>,
    noise: Vec<f64>,
    topics: Vec<f64>,
    speakers: Vec<f64>,
}

/// Lexicographic objective: worst deviation first, then total deviation.
#[derive(Debug, Clone, Copy)]
struct Score {
    max: f64,
    sum: f64,
}

impl Score {
    fn better_than(self, other: Score) -> bool {
        if self.max < other.max - EPS {
            return true;
        }
        self.max <= other.max + EPS && self.sum < other.sum - EPS
    }
}

fn add_to(acc: &mut [f64], parts: &[(usize, f64)], sign: f64) {
    for &(i, h) in parts {
        acc[i] += sign * h;
    }
}

impl Tally {
    fn new(m: &Model) -> Self {
        Tally {
            hours: 0.0,
            gender: vec![0.0; m.gender_keys.len()],
            noise: vec![0.0; m.noise_keys.len()],
            topics: vec![0.0; m.topic_keys.len()],
            speakers: vec![0.0; m.speaker_keys.len()],
        }
    }

    fn apply(&mut self, g: &Group, sign: f64) {
        self.hours += sign * g.hours;
        add_to(&mut self.gender, &g.gender, sign);
        add_to(&mut self.noise, &g.noise, sign);
        add_to(&mut self.topics, &g.topics, sign);
        add_to(&mut self.speakers, &g.speakers, sign);
    }

    /// Whether adding `g` keeps every speaker under 60 minutes.
    fn cap_ok(&self, g: &Group) -> bool {
        g.speakers
            .iter()
            .all(|&(s, h)| (self.speakers[s] + h) * 60.0 < 60.0)
    }
}

impl Model {
    /// With `prorate`, the hours axis is ignored and topic targets are scaled
    /// to the hours collected so far.
    fn score(&self, t: &Tally, prorate: bool) -> Score {
        let mut max: f64 = 0.0;
        let mut sum = 0.0;
        let mut push = |d: f64| {
            max = max.max(d);
            sum += d;
        };
        if !prorate {
            push(rel_dev(t.hours, self.target_hours));
        }
        for (target, acc) in [
            (&self.gender_target, &t.gender),
            (&self.noise_target, &t.noise),
        ] {
            if let Some(target) = target {
                for (i, &want) in target.iter().enumerate() {
                    let share = if t.hours > 0.0 { acc[i] / t.hours } else { 0.0 };
                    push(rel_dev(share, want));
                }
            }
        }
        let scale = if prorate {
            t.hours / self.target_hours
        } else {
            1.0
        };
        for (i, &want) in self.topic_target.iter().enumerate() {
            push(rel_dev(t.topics[i], want * scale));
        }
        Score { max, sum }
    }
}

fn index_of(keys: &mut Vec<String>, index: &mut BTreeMap<String, usize>, key: &str) -> usize {
    if let Some(&i) = index.get(key) {
        return i;
    }
    keys.push(key.to_string());
    index.insert(key.to_string(), keys.len() - 1);
    keys.len() - 1
}

fn accent_ok(spec: &PackagingSpec, accent: &str) -> bool {
    spec.accents.is_empty() || spec.accents.iter().any(|a| a.eq_ignore_ascii_case(accent))
}

fn eligible<'a>(
    corpus: &'a Corpus,
    spec: &PackagingSpec,
    opts: &PackagingOptions,
) -> Vec<&'a UtteranceRecord> {
    corpus
        .utterances
        .values()
        .filter(|u| {
            opts.audited
                .as_ref()
                .is_none_or(|a| a.contains(&u.utterance_id))
        })
        .filter(|u| accent_ok(spec, &u.accent))
        .filter(|u| !opts.excluded_speakers.contains(&u.speaker_id))
        .filter(|u| !opts.over_cap_speakers.contains(&u.speaker_id))
        .collect()
}

fn build_model(
    corpus: &Corpus,
    spec: &PackagingSpec,
    opts: &PackagingOptions,
) -> Result<Model, PackagingError> {
    let pool = eligible(corpus, spec, opts);
    if pool.is_empty() {
        return Err(PackagingError::EmptyEligiblePool);
    }
    let mut gender_keys: Vec<String> = spec.gender_proportion.keys().cloned().collect();
    let mut gender_idx: BTreeMap<String, usize> = gender_keys.iter().cloned().zip(0..).collect();
    let mut noise_keys: Vec<String> = spec.noise_proportion.keys().cloned().collect();
    let mut noise_idx: BTreeMap<String, usize> = noise_keys.iter().cloned().zip(0..).collect();
    let topic_keys: Vec<String> = spec.topics_by_hours.keys().cloned().collect();
    let topic_idx: BTreeMap<String, usize> = topic_keys.iter().cloned().zip(0..).collect();
    let mut speaker_keys = Vec::new();
    let mut speaker_idx = BTreeMap::new();

    let mut grouped: BTreeMap<String, Vec<&UtteranceRecord>> = BTreeMap::new();
    for u in pool {
        let key = if spec.session_atomic {
            &u.session_id
        } else {
            &u.utterance_id
        };
        grouped.entry(key.clone()).or_default().push(u);
    }
    let mut groups = Vec::with_capacity(grouped.len());
    for utts in grouped.values() {
        let mut g = Group {
            ids: Vec::new(),
            hours: 0.0,
            gender: Vec::new(),
            noise: Vec::new(),
            topics: Vec::new(),
            speakers: Vec::new(),
        };
        let bump = |parts: &mut Vec<(usize, f64)>, i: usize, h: f64| match parts
            .iter_mut()
            .find(|(j, _)| *j == i)
        {
            Some(slot) => slot.1 += h,
            None => parts.push((i, h)),
        };
        for u in utts {
            let h = u.duration_in_seconds / 3600.0;
            g.ids.push(u.utterance_id.clone());
            g.hours += h;
            bump(
                &mut g.gender,
                index_of(&mut gender_keys, &mut gender_idx, &u.gender),
                h,
            );
            bump(
                &mut g.noise,
                index_of(&mut noise_keys, &mut noise_idx, u.noise_background.as_str()),
                h,
            );
            bump(
                &mut g.speakers,
                index_of(&mut speaker_keys, &mut speaker_idx, &u.speaker_id),
                h,
            );
            let distinct: BTreeSet<&String> = u.topics.iter().collect();
            for t in distinct {
                if let Some(&i) = topic_idx.get(t) {
                    bump(&mut g.topics, i, h);
                }
            }
        }
        for parts in [&mut g.gender, &mut g.noise, &mut g.topics, &mut g.speakers] {
            parts.sort_by_key(|p| p.0);
        }
        groups.push(g);
    }
    let targets = |keys: &[String], m: &BTreeMap<String, f64>| {
        (!m.is_empty()).then(|| {
            keys.iter()
                .map(|k| m.get(k).copied().unwrap_or(0.0))
                .collect()
        })
    };
    Ok(Model {
        groups,
        target_hours: spec.target_hours,
        gender_target: targets(&gender_keys, &spec.gender_proportion),
        gender_keys,
        noise_target: targets(&noise_keys, &spec.noise_proportion),
        noise_keys,
        topic_target: topic_keys.iter().map(|k| spec.topics_by_hours[k]).collect(),
        topic_keys,
        speaker_keys,
    })
}

fn greedy(m: &Model, order: &[usize]) -> (Vec<bool>, Tally) {
    let mut chosen = vec![false; m.groups.len()];
    let mut tally = Tally::new(m);
    while tally.hours < m.target_hours - EPS {
        let mut best: Option<(usize, Score)> = None;
        for &g in order {
            let group = &m.groups[g];
            if chosen[g] || !tally.cap_ok(group) {
                continue;
            }
            tally.apply(group, 1.0);
            let s = m.score(&tally, true);
            tally.apply(group, -1.0);
            if best.is_none_or(|(_, b)| s.better_than(b)) {
                best = Some((g, s));
            }
        }
        let Some((g, _)) = best else { break };
        let after = tally.hours + m.groups[g].hours;
        if after > m.target_hours {
            if (after - m.target_hours).abs() < (tally.hours - m.target_hours).abs() {
                chosen[g] = true;
                tally.apply(&m.groups[g], 1.0);
            }
            break;
        }
        chosen[g] = true;
        tally.apply(&m.groups[g], 1.0);
    }
    (chosen, tally)
}

fn choose(n: usize, k: usize) -> u64 {
    match k {
        0 => 1,
        1 => n as u64,
        _ => (n as u64) * (n.saturating_sub(1) as u64) / 2,
    }
}

fn combos(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    match k {
        0 => vec![vec![]],
        1 => items.iter().map(|&i| vec![i]).collect(),
        _ => items
            .iter()
            .enumerate()
            .flat_map(|(x, &i)| items[x + 1..].iter().map(move |&j| vec![i, j]))
            .collect(),
    }
}

/// Moves as (removed, added) counts. The second tier changes up to two
/// groups on each side and only runs when the first stalls.
const SINGLE_MOVES: &[(usize, usize)] = &[(1, 0), (0, 1), (1, 1)];
const DOUBLE_MOVES: &[(usize, usize)] = &[(2, 0), (0, 2), (2, 1), (1, 2), (2, 2)];

type Exchange = (Vec<usize>, Vec<usize>, Score);

fn best_exchange(
    m: &Model,
    inside: &[usize],
    outside: &[usize],
    tally: &mut Tally,
    current: Score,
    moves: &[(usize, usize)],
) -> Option<Exchange> {
    let mut best: Option<Exchange> = None;
    for &(d, a) in moves {
        let adds = combos(outside, a);
        for drop in combos(inside, d) {
            drop.iter().for_each(|&g| tally.apply(&m.groups[g], -1.0));
            for add in adds.iter() {
                let mut applied = 0;
                for &g in add {
                    if !tally.cap_ok(&m.groups[g]) {
                        break;
                    }
                    tally.apply(&m.groups[g], 1.0);
                    applied += 1;
                }
                if applied == add.len() {
                    let s = m.score(tally, false);
                    if s.better_than(current)
                        && best.as_ref().is_none_or(|(_, _, b)| s.better_than(*b))
                    {
                        best = Some((drop.clone(), add.clone(), s));
                    }
                }
                add[..applied]
                    .iter()
                    .for_each(|&g| tally.apply(&m.groups[g], -1.0));
            }
            drop.iter().for_each(|&g| tally.apply(&m.groups[g], 1.0));
        }
    }
    best
}

/// Best-improvement exchange search, bounded by `budget` objective
/// evaluations.
fn local_search(
    m: &Model,
    order: &[usize],
    chosen: &mut [bool],
    tally: &mut Tally,
    budget: &mut u64,
) {
    let mut current = m.score(tally, false);
    loop {
        let inside: Vec<usize> = order.iter().copied().filter(|&g| chosen[g]).collect();
        let outside: Vec<usize> = order.iter().copied().filter(|&g| !chosen[g]).collect();
        let mut found = None;
        for tier in [SINGLE_MOVES, DOUBLE_MOVES] {
            let cost: u64 = tier
                .iter()
                .map(|&(d, a)| choose(inside.len(), d).saturating_mul(choose(outside.len(), a)))
                .sum();
            if cost > *budget {
                return;
            }
            *budget -= cost;
            found = best_exchange(m, &inside, &outside, tally, current, tier);
            if found.is_some() {
                break;
            }
        }
        let Some((drop, add, s)) = found else { return };
        for g in drop {
            chosen[g] = false;
            tally.apply(&m.groups[g], -1.0);
        }
        for g in add {
            chosen[g] = true;
            tally.apply(&m.groups[g], 1.0);
        }
        current = s;
    }
}

/// Random restarts around the incumbent: swap a few members for outsiders,
/// re-run local search, keep the result only if it beats the incumbent.
fn refine_with_kicks(
    m: &Model,
    order: &[usize],
    chosen: &mut Vec<bool>,
    tally: &mut Tally,
    budget: &mut u64,
    rng: &mut ChaCha8Rng,
) {
    let mut best = m.score(tally, false);
    for _ in 0..KICKS {
        if best.max <= EPS || *budget == 0 {
            return;
        }
        let mut trial = chosen.clone();
        let mut t = tally.clone();
        let inside: Vec<usize> = order.iter().copied().filter(|&g| trial[g]).collect();
        let outside: Vec<usize> = order.iter().copied().filter(|&g| !trial[g]).collect();
        let k = KICK_SIZE.min(inside.len()).min(outside.len());
        for &g in inside.choose_multiple(rng, k) {
            trial[g] = false;
            t.apply(&m.groups[g], -1.0);
        }
        for &g in outside.choose_multiple(rng, k) {
            if t.cap_ok(&m.groups[g]) {
                trial[g] = true;
                t.apply(&m.groups[g], 1.0);
            }
        }
        local_search(m, order, &mut trial, &mut t, budget);
        let s = m.score(&t, false);
        if s.better_than(best) {
            best = s;
            *chosen = trial;
            *tally = t;
        }
    }
}

const KICKS: usize = 64;
const KICK_SIZE: usize = 3;

/// Exhaustive search over how many members of each interchangeable class to
/// take. Groups are interchangeable when their contributions match exactly;
/// speakers join the signature only when the cap could bind for them.
fn exact(m: &Model, order: &[usize], budget: u64) -> Option<Vec<bool>> {
    let mut pool_hours = vec![0.0; m.speaker_keys.len()];
    for g in m.groups.iter() {
        add_to(&mut pool_hours, &g.speakers, 1.0);
    }
    let mut classes: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for &gi in order {
        let g = &m.groups[gi];
        let mut sig = vec![g.hours.to_bits()];
        for (tag, parts) in [(1u64, &g.gender), (2, &g.noise), (3, &g.topics)] {
            for &(i, h) in parts.iter() {
                sig.extend([tag, i as u64, h.to_bits()]);
            }
        }
        for &(s, h) in g.speakers.iter() {
            if pool_hours[s] * 60.0 >= 60.0 {
                sig.extend([4, s as u64, h.to_bits()]);
            }
        }
        classes.entry(sig).or_default().push(gi);
    }
    let classes: Vec<Vec<usize>> = classes.into_values().collect();
    let mut space: u64 = 1;
    for c in classes.iter() {
        space = space.saturating_mul(c.len() as u64 + 1);
        if space > budget {
            return None;
        }
    }

    struct Search<'a> {
        m: &'a Model,
        classes: &'a [Vec<usize>],
        counts: Vec<usize>,
        best: Option<(Vec<usize>, Score)>,
    }
    fn dfs(s: &mut Search, k: usize, tally: &mut Tally) {
        if k == s.classes.len() {
            let score = s.m.score(tally, false);
            if s.best.as_ref().is_none_or(|(_, b)| score.better_than(*b)) {
                s.best = Some((s.counts.clone(), score));
            }
            return;
        }
        let members = &s.classes[k];
        dfs(s, k + 1, tally);
        let mut taken = 0;
        for &g in members.iter() {
            if !tally.cap_ok(&s.m.groups[g]) {
                break;
            }
            tally.apply(&s.m.groups[g], 1.0);
            taken += 1;
            s.counts[k] = taken;
            dfs(s, k + 1, tally);
        }
        for &g in members[..taken].iter() {
            tally.apply(&s.m.groups[g], -1.0);
        }
        s.counts[k] = 0;
    }
    let mut search = Search {
        m,
        classes: &classes,
        counts: vec![0; classes.len()],
        best: None,
    };
    dfs(&mut search, 0, &mut Tally::new(m));
    let (counts, _) = search.best?;
    let mut chosen = vec![false; m.groups.len()];
    for (class, &n) in classes.iter().zip(counts.iter()) {
        for &g in class[..n].iter() {
            chosen[g] = true;
        }
    }
    Some(chosen)
}

fn finish(
    m: &Model,
    spec: &PackagingSpec,
    chosen: &[bool],
    method: SelectionMethod,
) -> PackageResult {
    let mut tally = Tally::new(m);
    let mut selected = Vec::new();
    for (_, group) in m.groups.iter().enumerate().filter(|(g, _)| chosen[*g]) {
        tally.apply(group, 1.0);
        selected.extend(group.ids.iter().cloned());
    }
    selected.sort();
    let nonzero = |keys: &[String], acc: &[f64], present: &[bool]| -> BTreeMap<String, f64> {
        keys.iter()
            .zip(acc)
            .zip(present)
            .filter(|(_, p)| **p)
            .map(|((k, v), _)| (k.clone(), *v))
            .collect()
    };
    let mut seen_gender = vec![false; m.gender_keys.len()];
    let mut seen_noise = vec![false; m.noise_keys.len()];
    let mut seen_topic = vec![false; m.topic_keys.len()];
    let mut seen_speaker = vec![false; m.speaker_keys.len()];
    for group in m
        .groups
        .iter()
        .enumerate()
        .filter(|(g, _)| chosen[*g])
        .map(|(_, g)| g)
    {
        group
            .gender
            .iter()
            .for_each(|&(i, _)| seen_gender[i] = true);
        group.noise.iter().for_each(|&(i, _)| seen_noise[i] = true);
        group.topics.iter().for_each(|&(i, _)| seen_topic[i] = true);
        group
            .speakers
            .iter()
            .for_each(|&(i, _)| seen_speaker[i] = true);
    }
    let achieved = Achieved {
        hours: tally.hours,
        gender_hours: nonzero(&m.gender_keys, &tally.gender, &seen_gender),
        noise_hours: nonzero(&m.noise_keys, &tally.noise, &seen_noise),
        topic_hours: nonzero(&m.topic_keys, &tally.topics, &seen_topic),
    };
    let speaker_minutes = nonzero(&m.speaker_keys, &tally.speakers, &seen_speaker)
        .into_iter()
        .map(|(k, h)| (k, h * 60.0))
        .collect();
    let entries = deviation_entries(spec, &achieved);
    let (deviations, max_deviation) = summarize(&entries);
    let infeasibility = entries
        .into_iter()
        .filter(|e| e.deviation > spec.tolerance + EPS)
        .collect();
    PackageResult {
        selected,
        method,
        achieved,
        deviations,
        max_deviation,
        speaker_minutes,
        infeasibility,
    }
}

/// Chooses utterances (or whole sessions) to match `spec`.
///
/// Small search spaces are solved exactly. Otherwise a greedy pass adds, one
/// at a time, the candidate that leaves the smallest worst-axis deviation
/// (topic targets pro-rated to the hours collected), stops at the target
/// hours, and is then refined by local search. Ties follow a seeded shuffle,
/// so equal inputs and seed give equal output.
pub fn select_subset(
    corpus: &Corpus,
    spec: &PackagingSpec,
    opts: &PackagingOptions,
    rng_seed: u64,
) -> Result<PackageResult, PackagingError> {
    spec.validate()?;
    let m = build_model(corpus, spec, opts)?;
    let mut order: Vec<usize> = (0..m.groups.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    order.shuffle(&mut rng);
    if opts.exact_search_budget > 0 {
        if let Some(chosen) = exact(&m, &order, opts.exact_search_budget) {
            return Ok(finish(&m, spec, &chosen, SelectionMethod::Exact));
        }
    }
    let (mut chosen, mut tally) = greedy(&m, &order);
    let mut budget = opts.local_search_budget;
    local_search(&m, &order, &mut chosen, &mut tally, &mut budget);
    refine_with_kicks(&m, &order, &mut chosen, &mut tally, &mut budget, &mut rng);
    Ok(finish(&m, spec, &chosen, SelectionMethod::Greedy))
}

/// Builds packages one after another so that no speaker appears in two.
pub fn select_disjoint(
    corpus: &Corpus,
    specs: &[PackagingSpec],
    opts: &PackagingOptions,
    rng_seed: u64,
) -> Result<Vec<PackageResult>, PackagingError> {
    let mut opts = opts.clone();
    let mut out = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let result = select_subset(corpus, spec, &opts, rng_seed.wrapping_add(i as u64))?;
        opts.excluded_speakers
            .extend(result.speaker_minutes.keys().cloned());
        out.push(result);
    }
    Ok(out)
}
