//! Training mode: the system interviews *you*. It draws the least-asked
//! question from a bank, you answer yes/no/neutral, and each answer is
//! stored as feedback that tunes future verdicts.
//!
//!     cargo run --example training_mode

use std::sync::Arc;

use moral_compass::{
    AdaptationEngine, AdaptationParams, DialogSettings, Embedder, Pipeline, QuestionBank, Store,
    Verdict,
};

fn main() -> moral_compass::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let pipeline = Pipeline::new(
        Arc::new(Embedder::deterministic(64)),
        Arc::new(AdaptationEngine::new(AdaptationParams::default())),
        Arc::new(Store::open(dir.path())?),
        DialogSettings::default(),
    )?;
    let mut bank = QuestionBank::from_questions([
        "should i lie to spare feelings?",
        "is it okay to jaywalk?",
        "should i recycle?",
    ])?;
    let mut session = pipeline.new_session("trainer");

    // A scripted trainee: always answers with a fixed opinion.
    let opinions = [
        ("should i recycle?", Verdict::Yes),
        ("should i lie to spare feelings?", Verdict::No),
        ("is it okay to jaywalk?", Verdict::Neutral),
    ];

    for round in 1..=6 {
        let entry = pipeline.training_next(&mut bank, &mut session)?;
        let opinion = opinions
            .iter()
            .find(|(q, _)| *q == entry.question)
            .map(|(_, v)| *v)
            .expect("bank question has a scripted opinion");
        let ack = pipeline.ingest_training_reply(&mut session, &bank, entry.bank_id, opinion)?;
        println!(
            "round {round}: asked {:?} (times asked: {}), answered {opinion} -> {ack}",
            entry.question, entry.times_asked
        );
    }

    // The scheduler rotated fairly: every question asked exactly twice.
    for entry in bank.entries() {
        assert_eq!(entry.times_asked, 2);
    }

    println!();
    let stats = pipeline.store().stats()?;
    println!(
        "{} answers recorded, agreement rate {:.2}",
        stats.total_feedback,
        stats.agreement_rate.unwrap_or(0.0)
    );

    // Training answers act exactly like live feedback: the trained
    // verdict now comes back when the same question is asked live.
    let plan = pipeline.handle_utterance(&mut session, "should i recycle?")?;
    println!("\n> should i recycle?\n{}   [{}]", plan.answer_text, plan.verdict);
    assert_eq!(plan.verdict, Verdict::Yes);
    Ok(())
}
