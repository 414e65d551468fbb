//! Topic/domain vocabulary: twenty seed categories, each with a keyword list.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicCategory {
    pub name: String,
    pub keywords: Vec<String>,
}

/// Ordered list of categories. Order matters: it breaks score ties in topic
/// detection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicVocabulary {
    pub categories: Vec<TopicCategory>,
}

const SEED: &[(&str, &[&str])] = &[
    (
        "clothing",
        &[
            "clothing", "clothes", "fashion", "dress", "shirt", "shoes", "jacket", "apparel",
        ],
    ),
    (
        "culture",
        &[
            "culture",
            "art",
            "museum",
            "tradition",
            "heritage",
            "festival",
            "literature",
        ],
    ),
    (
        "education",
        &[
            "education",
            "school",
            "student",
            "teacher",
            "university",
            "exam",
            "classroom",
            "lecture",
        ],
    ),
    (
        "finance",
        &[
            "finance",
            "bank",
            "stock",
            "stocks",
            "market",
            "investment",
            "loan",
            "interest",
            "economy",
        ],
    ),
    (
        "food",
        &[
            "food",
            "recipe",
            "cooking",
            "restaurant",
            "chef",
            "meal",
            "kitchen",
            "dinner",
        ],
    ),
    (
        "health",
        &[
            "health", "doctor", "hospital", "medicine", "patient", "disease", "fitness", "nurse",
        ],
    ),
    (
        "history",
        &[
            "history",
            "war",
            "ancient",
            "empire",
            "century",
            "historical",
            "revolution",
        ],
    ),
    (
        "hospitality",
        &[
            "hospitality",
            "hotel",
            "guest",
            "reservation",
            "resort",
            "reception",
        ],
    ),
    (
        "information and technology",
        &[
            "technology",
            "software",
            "computer",
            "internet",
            "app",
            "data",
            "programming",
            "smartphone",
        ],
    ),
    (
        "insurance",
        &[
            "insurance",
            "policy",
            "premium",
            "claim",
            "coverage",
            "deductible",
        ],
    ),
    (
        "legal",
        &[
            "legal", "law", "court", "lawyer", "judge", "contract", "attorney", "lawsuit",
        ],
    ),
    (
        "leisure time",
        &[
            "leisure",
            "hobby",
            "hiking",
            "gardening",
            "camping",
            "games",
            "weekend",
        ],
    ),
    (
        "entertainment",
        &[
            "entertainment",
            "tv",
            "film",
            "movie",
            "music",
            "news",
            "celebrity",
            "concert",
            "show",
        ],
    ),
    (
        "retail",
        &[
            "retail", "store", "shop", "shopping", "discount", "customer", "checkout", "sale",
        ],
    ),
    (
        "social networks",
        &[
            "social",
            "facebook",
            "twitter",
            "instagram",
            "followers",
            "post",
            "likes",
        ],
    ),
    (
        "sports",
        &[
            "sports",
            "sport",
            "basketball",
            "nba",
            "football",
            "soccer",
            "rebounds",
            "assists",
            "points",
            "game",
            "team",
            "westbrook",
            "tennis",
        ],
    ),
    (
        "telecommunication",
        &[
            "telecommunication",
            "phone",
            "network",
            "mobile",
            "carrier",
            "broadband",
            "signal",
        ],
    ),
    (
        "travel/holiday",
        &[
            "travel", "holiday", "flight", "airport", "vacation", "trip", "tourist", "passport",
        ],
    ),
    (
        "weather",
        &[
            "weather",
            "rain",
            "forecast",
            "temperature",
            "storm",
            "sunny",
            "snow",
            "wind",
        ],
    ),
    (
        "work",
        &[
            "work",
            "job",
            "office",
            "career",
            "salary",
            "colleague",
            "manager",
            "employer",
        ],
    ),
];

impl Default for TopicVocabulary {
    fn default() -> Self {
        TopicVocabulary {
            categories: SEED
                .iter()
                .map(|(name, kws)| TopicCategory {
                    name: name.to_string(),
                    keywords: kws.iter().map(|k| k.to_string()).collect(),
                })
                .collect(),
        }
    }
}

impl TopicVocabulary {
    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }

    /// A topic string is known when it names a category or one of its
    /// keywords (case-insensitive).
    pub fn contains(&self, topic: &str) -> bool {
        let t = topic.to_lowercase();
        self.categories
            .iter()
            .any(|c| c.name == t || c.keywords.contains(&t))
    }

    /// Category for a topic string, if any.
    pub fn category_of(&self, topic: &str) -> Option<&str> {
        let t = topic.to_lowercase();
        self.categories
            .iter()
            .find(|c| c.name == t || c.keywords.contains(&t))
            .map(|c| c.name.as_str())
    }
}
