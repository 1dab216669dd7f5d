//! Disagree with an answer and watch the correction take hold: the
//! same question re-asked lands exactly on the pushed-back verdict,
//! while unrelated questions stay untouched (the correction kernel is
//! local — only questions embedding near the feedback feel the pull).
//!
//!     cargo run --example feedback_loop

use std::sync::Arc;

use moral_compass::{
    AdaptationEngine, AdaptationParams, DialogSettings, Embedder, Pipeline, Store, Verdict,
};

fn main() -> moral_compass::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let settings = DialogSettings {
        feedback_probability: 0.0, // keep the transcript quiet
        ..DialogSettings::default()
    };
    let pipeline = Pipeline::new(
        Arc::new(Embedder::deterministic(64)),
        Arc::new(AdaptationEngine::new(AdaptationParams::default())),
        Arc::new(Store::open(dir.path())?),
        settings,
    )?;
    let mut session = pipeline.new_session("feedback-loop");

    let question = "should i eat cake for breakfast?";
    let bystander = "should i water the plants?";

    let before = pipeline.handle_utterance(&mut session, question)?;
    println!("> {question}");
    println!("{}   [{} {:+.4}]", before.answer_text, before.verdict, before.score.adjusted);
    let bystander_before = pipeline.handle_utterance(&mut session, bystander)?;
    println!("> {bystander}");
    println!(
        "{}   [{} {:+.4}]",
        bystander_before.answer_text, bystander_before.verdict, bystander_before.score.adjusted
    );

    // Push back on the first answer. Whatever it said, insist otherwise.
    let alternative = match before.verdict {
        Verdict::Yes => Verdict::No,
        _ => Verdict::Yes,
    };
    let ack = pipeline.handle_feedback(&mut session, before.turn_id, false, Some(alternative))?;
    println!("\n(disagree with the cake answer, suggesting {alternative})");
    println!("{ack}");

    let after = pipeline.handle_utterance(&mut session, question)?;
    println!("\n> {question}");
    println!("{}   [{} {:+.4}]", after.answer_text, after.verdict, after.score.adjusted);
    assert_eq!(after.verdict, alternative, "an exact repeat adopts the correction");

    let bystander_after = pipeline.handle_utterance(&mut session, bystander)?;
    println!("> {bystander}");
    println!(
        "{}   [{} {:+.4}]",
        bystander_after.answer_text, bystander_after.verdict, bystander_after.score.adjusted
    );
    assert_eq!(
        bystander_after.score.adjusted.to_bits(),
        bystander_before.score.adjusted.to_bits(),
        "feedback about cake must not move an unrelated question"
    );

    println!(
        "\n{} feedback record(s) now persisted in {}",
        pipeline.engine().active_len(),
        pipeline.store().feedback_path().display()
    );
    Ok(())
}
