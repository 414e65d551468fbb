//! Compile job-level validation rules and check transcripts as they are
//! typed, the way the workbench does before allowing a submit.
//!
//! ```bash
//! cargo run --example realtime_rules
//! ```

use anyhow::Result;
use serde_json::json;
use speech_hitl::qc::{compile_rules, validate_realtime, ValidationRule};

fn main() -> Result<()> {
    let rules: Vec<ValidationRule> = serde_json::from_value(json!([
        {"rule_id": "spacing", "kind": "format", "parameters": {"check": "no_double_space"},
         "message": "remove the double space"},
        {"rule_id": "digits", "kind": "format", "parameters": {"check": "no_digits"},
         "message": "spell numbers out: {detail}"},
        {"rule_id": "tags", "kind": "pattern", "parameters": {"regex": "\\[(?:noise|laugh)\\]", "forbid": true},
         "message": "event tags are not used in this guideline", "hard": false},
        {"rule_id": "length", "kind": "length", "parameters": {"max_words": 12},
         "message": "too long for one clip: {detail}"}
    ]))?;
    let compiled = compile_rules(&rules)?;

    for text in [
        "we meet at the harbour at noon",
        "we meet at  the harbour at 12",
        "we meet [laugh] at the harbour",
    ] {
        let v = validate_realtime(text, &compiled);
        let blocked = v.iter().any(|r| r.hard);
        println!("{text:?} blocked={blocked}");
        for r in v {
            println!("    {} {}", r.rule_id, r.message);
        }
    }

    let broken: Vec<ValidationRule> = serde_json::from_value(json!([
        {"rule_id": "bad", "kind": "pattern", "parameters": {"regex": "("}, "message": "x"}
    ]))?;
    println!("invalid rule: {}", compile_rules(&broken).unwrap_err());
    Ok(())
}
