//! Boot the HTTP gateway on an ephemeral port and walk every endpoint
//! with a real client: session, ask, feedback, training, stats.
//!
//!     cargo run --example serve_api

use std::sync::Arc;

use moral_compass::{start, Config, Service};
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    std::fs::write(
        dir.path().join("bank.txt"),
        "# training questions\nshould i exercise?\nis it okay to snack?\n",
    )?;

    let mut config = Config::default();
    config.storage_dir = dir.path().join("data");
    config.bank_path = dir.path().join("bank.txt");
    config.feedback_probability = 0.0;

    let service = Arc::new(Service::new(&config)?);
    let server = start(service, "127.0.0.1:0".parse()?)?;
    println!("serving on http://{}\n", server.addr());

    let client = reqwest::blocking::Client::new();
    let show = |label: &str, value: &Value| {
        println!("{label}\n  {}", serde_json::to_string(value).unwrap());
    };

    let health: Value = client.get(server.url("/healthz")).send()?.json()?;
    show("GET /healthz", &health);

    let session: Value = client
        .post(server.url("/api/session"))
        .json(&json!({}))
        .send()?
        .json()?;
    show("POST /api/session", &session);
    let sid = session["session_id"].as_str().unwrap().to_string();

    let plan: Value = client
        .post(server.url("/api/ask"))
        .json(&json!({"session_id": sid, "utterance": "Should I take a nap?"}))
        .send()?
        .json()?;
    show("POST /api/ask", &plan);

    let ack: Value = client
        .post(server.url("/api/feedback"))
        .json(&json!({
            "session_id": sid,
            "turn_id": plan["turn_id"],
            "agrees": false,
            "alternative_verdict": "Yes",
        }))
        .send()?
        .json()?;
    show("POST /api/feedback (disagree -> Yes)", &ack);

    let again: Value = client
        .post(server.url("/api/ask"))
        .json(&json!({"session_id": sid, "utterance": "should i take a nap?"}))
        .send()?
        .json()?;
    show("POST /api/ask (same question after feedback)", &again);

    let entry: Value = client
        .get(server.url(&format!("/api/training/next?session_id={sid}")))
        .send()?
        .json()?;
    show("GET /api/training/next", &entry);

    let answer: Value = client
        .post(server.url("/api/training/answer"))
        .json(&json!({
            "session_id": sid,
            "bank_id": entry["bank_id"],
            "verdict": "Neutral",
        }))
        .send()?
        .json()?;
    show("POST /api/training/answer", &answer);

    let stats: Value = client.get(server.url("/api/stats")).send()?.json()?;
    show("GET /api/stats", &stats);

    // Errors come back as JSON bodies with proper status codes.
    let missing = client
        .post(server.url("/api/ask"))
        .json(&json!({"session_id": "s-404", "utterance": "should i exist?"}))
        .send()?;
    println!(
        "POST /api/ask with unknown session\n  {} {}",
        missing.status(),
        missing.text()?
    );

    server.stop();
    println!("\nserver stopped.");
    Ok(())
}
