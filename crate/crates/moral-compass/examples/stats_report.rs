//! Generate a burst of traffic, then read the aggregate statistics
//! back from the append-only logs the way a dashboard would.
//!
//!     cargo run --example stats_report

use std::sync::Arc;

use moral_compass::{
    AdaptationEngine, AdaptationParams, DialogSettings, Embedder, Pipeline, Store, Verdict,
};

fn main() -> moral_compass::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let pipeline = Pipeline::new(
        Arc::new(Embedder::deterministic(64)),
        Arc::new(AdaptationEngine::new(AdaptationParams::default())),
        Arc::new(Store::open(dir.path())?),
        DialogSettings::default(),
    )?;
    let mut session = pipeline.new_session("traffic");

    let actions = [
        "walk to work", "skip breakfast", "call my mother", "buy a boat", "plant basil",
        "learn the violin", "adopt a cat", "complain", "tell the truth", "sleep in",
    ];
    let mut turns = Vec::new();
    for action in actions {
        let q = format!("should i {action}?");
        let plan = pipeline.handle_utterance(&mut session, &q)?;
        turns.push((plan.turn_id, plan.verdict));
    }
    // Agree with some answers, push back on others.
    for (i, (turn_id, verdict)) in turns.iter().enumerate() {
        if i % 3 == 0 {
            pipeline.handle_feedback(&mut session, *turn_id, true, None)?;
        } else if i % 3 == 1 {
            let alternative = match verdict {
                Verdict::No => Verdict::Yes,
                _ => Verdict::No,
            };
            pipeline.handle_feedback(&mut session, *turn_id, false, Some(alternative))?;
        }
    }

    let stats = pipeline.store().stats()?;
    println!("queries:        {}", stats.total_queries);
    println!("feedback:       {}", stats.total_feedback);
    match stats.agreement_rate {
        Some(rate) => println!("agreement rate: {rate:.3}"),
        None => println!("agreement rate: n/a (no feedback yet)"),
    }
    println!("verdicts:");
    println!("  yes     {:>3}", stats.verdict_histogram.yes);
    println!("  no      {:>3}", stats.verdict_histogram.no);
    println!("  neutral {:>3}", stats.verdict_histogram.neutral);

    // The same numbers as machine-readable JSON (what /api/stats serves).
    println!("\nas JSON: {}", serde_json::to_string(&stats)?);

    // Everything above came from two plain files:
    println!("\nlog files behind the report:");
    for path in [pipeline.store().queries_path(), pipeline.store().feedback_path()] {
        let lines = std::fs::read_to_string(&path)?.lines().count();
        println!("  {} ({lines} lines)", path.display());
    }
    Ok(())
}
