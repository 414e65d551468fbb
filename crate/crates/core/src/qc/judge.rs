use serde::{Deserialize, Serialize};

use super::AnswerKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgePolicy {
    /// Maximum word error rate for a transcription to count as correct.
    pub wer_tolerance: f64,
}

impl Default for JudgePolicy {
    fn default() -> Self {
        JudgePolicy {
            wer_tolerance: 0.10,
        }
    }
}

/// Lowercases, drops punctuation and splits on whitespace.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Levenshtein distance over token sequences.
pub fn word_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word error rate of `hypothesis` against `reference` after normalization.
/// An empty reference gives 0 for an empty hypothesis and 1 otherwise.
pub fn word_error_rate(hypothesis: &str, reference: &str) -> f64 {
    let h = normalize_tokens(hypothesis);
    let r = normalize_tokens(reference);
    if r.is_empty() {
        return if h.is_empty() { 0.0 } else { 1.0 };
    }
    word_edit_distance(&h, &r) as f64 / r.len() as f64
}

pub fn judge_answer(
    kind: AnswerKind,
    submitted: &str,
    ground_truth: &str,
    policy: &JudgePolicy,
) -> bool {
    match kind {
        AnswerKind::Label => normalize_tokens(submitted) == normalize_tokens(ground_truth),
        AnswerKind::Transcription => {
            word_error_rate(submitted, ground_truth) <= policy.wer_tolerance + 1e-12
        }
    }
}
