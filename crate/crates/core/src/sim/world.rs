use rand::seq::{index, SliceRandom};
use rand::Rng;

const WORDS: &[&str] = &[
    "the", "weather", "today", "is", "going", "to", "be", "cold", "and", "windy", "please", "call",
    "me", "back", "after", "lunch", "market", "prices", "went", "up", "again", "this", "morning",
    "team", "won", "their", "game", "last", "night", "in", "overtime", "new", "school", "opens",
    "next", "week", "traffic", "on", "bridge", "heavy",
];

/// Eight to fourteen random words.
pub fn random_transcript(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(8..=14);
    (0..n)
        .map(|_| *WORDS.choose(rng).expect("words"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Substitutes at least a third of the tokens (at least two), so the result
/// is always more than 10% WER away from `truth`.
pub fn corrupt_transcript(truth: &str, rng: &mut impl Rng) -> String {
    let mut tokens: Vec<&str> = truth.split_whitespace().collect();
    if tokens.is_empty() {
        return "unintelligible".into();
    }
    let k = (tokens.len().div_ceil(3)).max(2).min(tokens.len());
    for i in index::sample(rng, tokens.len(), k) {
        let current = tokens[i];
        let mut w = *WORDS.choose(rng).expect("words");
        while w == current {
            w = WORDS.choose(rng).expect("words");
        }
        tokens[i] = w;
    }
    tokens.join(" ")
}
