use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{normalize_tokens, QcError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    /// `{"regex": "...", "forbid": true}`; with `forbid: false` the text must match.
    Pattern,
    /// Any of `min_chars`, `max_chars`, `min_words`, `max_words`.
    Length,
    /// `{"banned": [...]}` and/or `{"allowed": [...]}` over normalized words.
    Lexicon,
    /// `{"check": name}` with name one of `no_double_space`,
    /// `no_edge_whitespace`, `no_digits`, `balanced_brackets`.
    Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRule {
    pub rule_id: String,
    pub kind: RuleKind,
    #[serde(default)]
    pub parameters: Value,
    /// Shown to the annotator. `{detail}` is replaced with specifics.
    pub message: String,
    /// Hard rules block submission in the workbench.
    #[serde(default = "yes")]
    pub hard: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule_id: String,
    pub message: String,
    pub hard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FormatCheck {
    NoDoubleSpace,
    NoEdgeWhitespace,
    NoDigits,
    BalancedBrackets,
}

#[derive(Debug, Clone)]
enum Compiled {
    Pattern {
        re: Regex,
        forbid: bool,
    },
    Length {
        min_chars: Option<usize>,
        max_chars: Option<usize>,
        min_words: Option<usize>,
        max_words: Option<usize>,
    },
    Lexicon {
        banned: BTreeSet<String>,
        allowed: Option<BTreeSet<String>>,
    },
    Format(FormatCheck),
}

#[derive(Debug, Clone)]
struct CompiledRule {
    rule: ValidationRule,
    check: Compiled,
}

/// Rules ready to evaluate, in their original order.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<CompiledRule>,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

fn bad(rule: &ValidationRule, reason: impl Into<String>) -> QcError {
    QcError::BadRule {
        rule_id: rule.rule_id.clone(),
        reason: reason.into(),
    }
}

fn opt_usize(rule: &ValidationRule, key: &str) -> Result<Option<usize>, QcError> {
    match rule.parameters.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| bad(rule, format!("{key} must be a non-negative integer"))),
    }
}

fn word_set(rule: &ValidationRule, key: &str) -> Result<Option<BTreeSet<String>>, QcError> {
    match rule.parameters.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(|s| normalize_tokens(s).join(" "))
                    .ok_or_else(|| bad(rule, format!("{key} entries must be strings")))
            })
            .collect::<Result<BTreeSet<_>, _>>()
            .map(Some),
        Some(_) => Err(bad(rule, format!("{key} must be a list"))),
    }
}

fn compile_one(rule: &ValidationRule) -> Result<Compiled, QcError> {
    let p = &rule.parameters;
    if !(p.is_object() || p.is_null()) {
        return Err(bad(rule, "parameters must be an object"));
    }
    Ok(match rule.kind {
        RuleKind::Pattern => {
            let src = p
                .get("regex")
                .and_then(Value::as_str)
                .ok_or_else(|| bad(rule, "missing regex"))?;
            let re = Regex::new(src).map_err(|e| bad(rule, e.to_string()))?;
            let forbid = match p.get("forbid") {
                None => true,
                Some(v) => v
                    .as_bool()
                    .ok_or_else(|| bad(rule, "forbid must be a boolean"))?,
            };
            Compiled::Pattern { re, forbid }
        }
        RuleKind::Length => {
            let c = Compiled::Length {
                min_chars: opt_usize(rule, "min_chars")?,
                max_chars: opt_usize(rule, "max_chars")?,
                min_words: opt_usize(rule, "min_words")?,
                max_words: opt_usize(rule, "max_words")?,
            };
            if let Compiled::Length {
                min_chars: None,
                max_chars: None,
                min_words: None,
                max_words: None,
            } = c
            {
                return Err(bad(rule, "no length bound given"));
            }
            c
        }
        RuleKind::Lexicon => {
            let banned = word_set(rule, "banned")?;
            let allowed = word_set(rule, "allowed")?;
            if banned.is_none() && allowed.is_none() {
                return Err(bad(rule, "needs banned or allowed"));
            }
            Compiled::Lexicon {
                banned: banned.unwrap_or_default(),
                allowed,
            }
        }
        RuleKind::Format => {
            let name = p
                .get("check")
                .and_then(Value::as_str)
                .ok_or_else(|| bad(rule, "missing check"))?;
            Compiled::Format(match name {
                "no_double_space" => FormatCheck::NoDoubleSpace,
                "no_edge_whitespace" => FormatCheck::NoEdgeWhitespace,
                "no_digits" => FormatCheck::NoDigits,
                "balanced_brackets" => FormatCheck::BalancedBrackets,
                other => return Err(bad(rule, format!("unknown format check {other}"))),
            })
        }
    })
}

pub fn compile_rules(rules: &[ValidationRule]) -> Result<RuleSet, QcError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rules.len());
    for rule in rules {
        if !seen.insert(rule.rule_id.as_str()) {
            return Err(bad(rule, "duplicate rule id"));
        }
        out.push(CompiledRule {
            rule: rule.clone(),
            check: compile_one(rule)?,
        });
    }
    Ok(RuleSet { rules: out })
}

fn balanced(text: &str) -> bool {
    let mut stack = Vec::new();
    for c in text.chars() {
        match c {
            '(' | '[' | '{' | '<' => stack.push(c),
            ')' | ']' | '}' | '>' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    '}' => '{',
                    _ => '<',
                };
                if stack.pop() != Some(want) {
                    return false;
                }
            }
            _ => {}
        }
    }
    stack.is_empty()
}

/// Returns the failure detail, or `None` when the text passes.
fn check(c: &Compiled, text: &str) -> Option<String> {
    match c {
        Compiled::Pattern { re, forbid: true } => {
            re.find(text).map(|m| format!("found \"{}\"", m.as_str()))
        }
        Compiled::Pattern { re, forbid: false } => {
            (!re.is_match(text)).then(|| "required pattern missing".to_string())
        }
        Compiled::Length {
            min_chars,
            max_chars,
            min_words,
            max_words,
        } => {
            let chars = text.chars().count();
            let words = text.split_whitespace().count();
            if min_chars.is_some_and(|m| chars < m) || max_chars.is_some_and(|m| chars > m) {
                Some(format!("{chars} characters"))
            } else if min_words.is_some_and(|m| words < m) || max_words.is_some_and(|m| words > m) {
                Some(format!("{words} words"))
            } else {
                None
            }
        }
        Compiled::Lexicon { banned, allowed } => {
            let mut bad_words: Vec<String> = Vec::new();
            for w in normalize_tokens(text) {
                let hit = banned.contains(&w) || allowed.as_ref().is_some_and(|a| !a.contains(&w));
                if hit && !bad_words.contains(&w) {
                    bad_words.push(w);
                }
            }
            (!bad_words.is_empty()).then(|| bad_words.join(", "))
        }
        Compiled::Format(f) => match f {
            FormatCheck::NoDoubleSpace => text
                .find("  ")
                .map(|i| format!("double space at {}", text[..i].chars().count())),
            FormatCheck::NoEdgeWhitespace => {
                (text.trim() != text).then(|| "leading or trailing whitespace".to_string())
            }
            FormatCheck::NoDigits => {
                let digits: String = text.chars().filter(|c| c.is_ascii_digit()).collect();
                (!digits.is_empty()).then(|| format!("digits \"{digits}\""))
            }
            FormatCheck::BalancedBrackets => {
                (!balanced(text)).then(|| "unbalanced brackets".to_string())
            }
        },
    }
}

/// Every failing rule, in rule order. An empty list means the text passes.
pub fn validate_realtime(text: &str, rules: &RuleSet) -> Vec<RuleViolation> {
    rules
        .rules
        .iter()
        .filter_map(|r| {
            check(&r.check, text).map(|detail| RuleViolation {
                rule_id: r.rule.rule_id.clone(),
                message: r.rule.message.replace("{detail}", &detail),
                hard: r.rule.hard,
            })
        })
        .collect()
}
