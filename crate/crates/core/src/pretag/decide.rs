//! Small decision functions used by the pipeline: pre-label gating, language
//! routing and keyword topic detection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{GatingPolicy, PrelabelMode, PretagError, Routing, Stage, StagePayload, StageResult};
use crate::corpus::TopicVocabulary;

/// Shows pre-labels only when the estimated accuracy reaches the help
/// threshold. The band between the two thresholds is treated as harmful.
pub fn gate_prelabels(asr_confidence: f64, policy: &GatingPolicy) -> PrelabelMode {
    if asr_confidence >= policy.help_threshold {
        PrelabelMode::Assisted
    } else {
        PrelabelMode::FromScratch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub routing: Routing,
    pub confidence: f64,
}

/// Accepts a session whose detected language is supported (case-insensitive).
pub fn route_language(
    lang_result: &StageResult,
    supported: &BTreeSet<String>,
) -> Result<RouteDecision, PretagError> {
    let StagePayload::LanguageId { language } = &lang_result.payload else {
        return Err(PretagError::PayloadMismatch {
            stage: Stage::LanguageID,
            found: lang_result.payload.stage(),
        });
    };
    let lang = language.to_lowercase();
    let accepted = supported.iter().any(|s| s.to_lowercase() == lang);
    let routing = if accepted {
        Routing::Accepted {
            language: lang,
            accent: None,
        }
    } else {
        Routing::RejectedUnsupportedLanguage { language: lang }
    };
    Ok(RouteDecision {
        routing,
        confidence: lang_result.confidence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScore {
    pub topic: String,
    pub hits: usize,
    /// Keyword hits divided by transcript length in tokens.
    pub score: f64,
}

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Scores every category with at least one keyword hit, best first. Ties keep
/// vocabulary order.
pub fn score_topics(transcript: &str, vocab: &TopicVocabulary) -> Vec<TopicScore> {
    let tokens = tokenize(transcript);
    if tokens.is_empty() {
        return Vec::new();
    }
    let mut scored: Vec<TopicScore> = vocab
        .categories
        .iter()
        .filter_map(|c| {
            let hits = tokens
                .iter()
                .filter(|t| c.keywords.iter().any(|k| k == *t) || c.name == **t)
                .count();
            (hits > 0).then(|| TopicScore {
                topic: c.name.clone(),
                hits,
                score: hits as f64 / tokens.len() as f64,
            })
        })
        .collect();
    // stable sort keeps vocabulary order among equal scores
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    scored
}

/// Ranked topic names for a transcript; empty transcript gives no topics.
pub fn detect_topics(transcript: &str, vocab: &TopicVocabulary) -> Vec<String> {
    score_topics(transcript, vocab)
        .into_iter()
        .map(|t| t.topic)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gating_defaults() {
        let p = GatingPolicy::default();
        assert_eq!(gate_prelabels(0.90, &p), PrelabelMode::Assisted);
        assert_eq!(gate_prelabels(0.65, &p), PrelabelMode::FromScratch);
        assert_eq!(gate_prelabels(0.85, &p), PrelabelMode::Assisted);
        assert_eq!(gate_prelabels(0.80, &p), PrelabelMode::FromScratch);
    }

    proptest! {
        #[test]
        fn gating_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let p = GatingPolicy::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if gate_prelabels(lo, &p) == PrelabelMode::Assisted {
                prop_assert_eq!(gate_prelabels(hi, &p), PrelabelMode::Assisted);
            }
        }
    }

    fn lang(l: &str, c: f64) -> StageResult {
        StageResult::new(StagePayload::LanguageId { language: l.into() }, c, "test")
    }

    #[test]
    fn routing_supported_and_not() {
        let supported: BTreeSet<String> = ["english".to_string()].into();
        let d = route_language(&lang("english", 0.97), &supported).unwrap();
        assert!(d.routing.is_accepted());
        assert_eq!(d.confidence, 0.97);
        let d = route_language(&lang("tagalog", 0.91), &supported).unwrap();
        assert_eq!(
            d.routing,
            Routing::RejectedUnsupportedLanguage {
                language: "tagalog".into()
            }
        );
    }

    #[test]
    fn routing_requires_language_payload() {
        let r = StageResult::new(
            StagePayload::SyntheticDetection { spoofed: false },
            1.0,
            "t",
        );
        assert!(route_language(&r, &BTreeSet::new()).is_err());
    }

    #[test]
    fn sports_transcript() {
        let v = TopicVocabulary::default();
        let t = detect_topics("westbrook rebounds assists nba", &v);
        assert_eq!(t.first().map(String::as_str), Some("sports"));
        assert!(detect_topics("", &v).is_empty());
    }

    #[test]
    fn planted_counts_rank_topics() {
        let v = TopicVocabulary::default();
        // 5 weather, 3 food, 1 legal, 6 filler tokens
        let text = "rain forecast storm snow wind recipe chef meal court the a of and to it";
        let s = score_topics(text, &v);
        let names: Vec<_> = s.iter().map(|t| t.topic.as_str()).collect();
        assert_eq!(names, vec!["weather", "food", "legal"]);
        let hits: Vec<_> = s.iter().map(|t| t.hits).collect();
        assert_eq!(hits, vec![5, 3, 1]);
        assert!((s[0].score - 5.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn ties_follow_vocabulary_order() {
        let v = TopicVocabulary::default();
        // one hit each for weather and food: food comes first in the vocabulary
        assert_eq!(detect_topics("rain recipe", &v), vec!["food", "weather"]);
    }
}
