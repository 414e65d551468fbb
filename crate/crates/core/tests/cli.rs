use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn cli(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speech-hitl"))
        .env("SPEECHHITL_STORE", store)
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/appendix");
    let report = ok_json(cli(dir.path(), &["validate", fixtures.to_str().unwrap()]));
    assert_eq!(report["violations"], json!([]));

    let broken = dir.path().join("broken");
    let mut corpus = speech_hitl::corpus::load_corpus(&fixtures).unwrap();
    corpus
        .utterances
        .values_mut()
        .for_each(|u| u.duration_in_seconds = 25.0);
    speech_hitl::corpus::save_corpus(&corpus, &broken).unwrap();
    let out = cli(dir.path(), &["validate", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("UTTERANCE_TOO_LONG"), "{text}");
}

#[test]
fn job_flow_persists_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let clip = |p: String| json!({"kind": "transcription", "audio_path": p, "duration_seconds": 4.0, "prelabel": "hi there"});
    let units: Vec<Value> = (0..20)
        .map(|i| json!({"unit_id": format!("u{i}"), "session_id": "s", "payload": clip(format!("/u{i}.wav"))}))
        .collect();
    let tqs: Vec<Value> = (0..30)
        .map(|j| {
            let mut t = clip(format!("/t{j}.wav"));
            t["tq_id"] = json!(format!("t{j}"));
            t["ground_truth"] = json!("hi there");
            t["verified_by"] = json!("lead");
            t
        })
        .collect();
    let job = dir.path().join("job.json");
    std::fs::write(
        &job,
        json!({"job_id": "c", "locale": "en-us", "units": units, "tq_pool": tqs}).to_string(),
    )
    .unwrap();

    ok_json(cli(&store, &["qualify", "kim", "en-us"]));
    assert_eq!(
        ok_json(cli(&store, &["job", "create", job.to_str().unwrap()]))["job_id"],
        "c"
    );
    let view = ok_json(cli(&store, &["job", "next", "c", "--annotator", "kim"]));
    let answers: Vec<Value> = view["slots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| json!({"token": s["token"], "text": "hi there"}))
        .collect();
    let sub = dir.path().join("sub.json");
    std::fs::write(&sub, json!({"answers": answers}).to_string()).unwrap();
    let id = view["assignment_id"].as_str().unwrap();
    let receipt = ok_json(cli(
        &store,
        &[
            "job",
            "submit",
            id,
            sub.to_str().unwrap(),
            "--annotator",
            "kim",
        ],
    ));
    assert_eq!(receipt["status"], "active");
    let status = ok_json(cli(&store, &["job", "status", "c"]));
    assert_eq!(status["units_by_state"]["accepted"], 10);
    assert_eq!(status["units_by_state"]["queued"], 10);

    let out = cli(&store, &["job", "finalize", "c"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not yet accepted"));
}

#[test]
fn simulate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        json!({"population": [{"base_accuracy": 0.9, "count": 3}], "job": {"units": 30, "locale": "en-us",
               "clip_seconds": 8.0, "prelabel_mode": null, "tq_pool_size": 100}})
        .to_string(),
    )
    .unwrap();
    let run = |seed: &str| {
        cli(
            dir.path(),
            &[
                "--seed",
                seed,
                "simulate",
                "--scenario",
                scenario.to_str().unwrap(),
            ],
        )
        .stdout
    };
    let a = run("4");
    assert_eq!(a, run("4"));
    assert_ne!(a, run("5"));
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["rng_seed"], 4);
    assert_eq!(report["units"], 30);
}
