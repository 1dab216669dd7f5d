//! Ask a single question and print every facet of the planned
//! response: verdict, scores, emotion, gesture, prosody.
//!
//!     cargo run --example ask_once -- "should i plant a tree?"

use std::sync::Arc;

use moral_compass::{AdaptationEngine, AdaptationParams, DialogSettings, Embedder, Pipeline, Store};

fn main() -> moral_compass::Result<()> {
    let question = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "should i plant a tree?".to_string());

    let dir = tempfile::tempdir().expect("temp dir");
    let pipeline = Pipeline::new(
        Arc::new(Embedder::deterministic(64)),
        Arc::new(AdaptationEngine::new(AdaptationParams::default())),
        Arc::new(Store::open(dir.path())?),
        DialogSettings::default(),
    )?;

    let mut session = pipeline.new_session("ask-once");
    let plan = pipeline.handle_utterance(&mut session, &question)?;

    println!("question:  {question}");
    println!("answer:    {}", plan.answer_text);
    println!("verdict:   {}", plan.verdict);
    println!(
        "score:     raw {:+.4}  normalized {:+.4}  adjusted {:+.4}",
        plan.score.raw, plan.score.normalized, plan.score.adjusted
    );
    println!(
        "emotion:   {} (similarity {:+.4})",
        plan.emotion.label, plan.emotion.similarity
    );
    println!("gesture:   {}", plan.gesture);
    println!(
        "prosody:   pitch x{:.2}, rate x{:.2}",
        plan.prosody.pitch, plan.prosody.rate
    );
    Ok(())
}
