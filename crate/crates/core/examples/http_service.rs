//! Run the HTTP API on a local port and talk to it the way a workbench
//! client would.
//!
//! ```bash
//! cargo run --example http_service
//! ```

use std::sync::Arc;

use anyhow::Result;
use serde_json::{json, Value};
use speech_hitl::orchestrator::{serve, Orchestrator, ServiceConfig, SystemClock};

fn main() -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    let orch = Arc::new(Orchestrator::ephemeral(
        ServiceConfig::default(),
        Arc::new(SystemClock),
    ));
    rt.spawn(serve(listener, orch));

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let post = |path: &str, body: Value| -> Result<(u16, Value)> {
        let mut r = agent.post(&format!("{base}{path}")).send_json(body)?;
        Ok((r.status().as_u16(), r.body_mut().read_json()?))
    };
    let get = |path: &str| -> Result<(u16, Value)> {
        let mut r = agent.get(&format!("{base}{path}")).call()?;
        Ok((r.status().as_u16(), r.body_mut().read_json()?))
    };

    let clip = |path: String, text: &str| json!({"kind": "transcription", "audio_path": path, "duration_seconds": 4.0, "prelabel": text});
    let units: Vec<Value> = (0..24)
        .map(|i| {
            json!({"unit_id": format!("u{i}"), "session_id": "s1",
                        "payload": clip(format!("/u{i}.wav"), "hello there")})
        })
        .collect();
    let pool: Vec<Value> = (0..40)
        .map(|j| {
            // Test questions carry the payload fields inline.
            let mut tq = clip(format!("/t{j}.wav"), "hello there");
            tq["tq_id"] = json!(format!("t{j}"));
            tq["ground_truth"] = json!("hello there");
            tq["verified_by"] = json!("lead");
            tq
        })
        .collect();
    let job = json!({"job_id": "demo", "locale": "en-us", "guideline_version": "v1",
                     "tq_pool": pool, "units": units});
    println!("POST /jobs -> {:?}", post("/jobs", job)?);

    let (code, body) = get("/jobs/demo/next-assignment?annotator=kim")?;
    println!("lease before qualification -> {code} {}", body["error"]);
    post("/annotators/kim/qualification", json!({"locale": "en-us"}))?;
    let (code, view) = get("/jobs/demo/next-assignment?annotator=kim")?;
    let slots = view["slots"].as_array().cloned().unwrap_or_default();
    println!(
        "lease -> {code}, {} slots, keys {:?}",
        slots.len(),
        slots[0].as_object().map(|o| o.keys().collect::<Vec<_>>())
    );

    let answers: Vec<Value> = slots
        .iter()
        .map(|s| json!({"token": s["token"], "text": "hello there"}))
        .collect();
    let id = view["assignment_id"].as_str().unwrap_or_default();
    let (code, receipt) = post(
        &format!("/assignments/{id}/submit"),
        json!({"answers": answers}),
    )?;
    println!("submit -> {code} {receipt}");

    let (_, status) = get("/jobs/demo/status")?;
    println!("status -> {}", status["units_by_state"]);
    let (code, err) = post("/jobs/demo/finalize", json!({}))?;
    // Malformed bodies get the same error shape as service errors.
    let (bad, why) = post("/jobs", json!({"units": 3}))?;
    println!("bad job -> {bad} {}", why["error"]);
    println!("finalize early -> {code} {}", err["error"]);
    Ok(())
}
