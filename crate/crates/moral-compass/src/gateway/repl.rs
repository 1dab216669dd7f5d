//! Interactive text console: ask questions, give feedback, run training
//! rounds. A desk-scale stand-in for talking to the robot.
//!
//! Deterministic conversation output (answers, annotations, acks,
//! training prompts, stats) goes to stdout; the banner, prompt, and
//! runtime errors go to stderr. With a fixed seed, piping the same
//! script in therefore produces a byte-identical stdout transcript.

use std::io::{BufRead, Write};

use crate::dialog::{Pipeline, QuestionBank, ResponsePlan, Session, SessionMode};
use crate::error::Result;
use crate::moral::Verdict;

use super::config::Config;
use super::service::build_stack;

const FEEDBACK_USAGE: &str = "usage: /feedback agree|yes|no|neutral";
const FEEDBACK_PROMPT: &str = "do you agree? (/feedback agree|yes|no|neutral)";
const TRAINING_REPLY_PROMPT: &str = "please answer yes, no, or neutral (or /stop).";

/// `answer` line plus `[verdict|emotion|gesture|pitch|rate|score]`,
/// where score is the adjusted value the verdict came from.
fn annotation(plan: &ResponsePlan) -> String {
    format!(
        "[{}|{}|{}|{:.2}|{:.2}|{:+.4}]",
        plan.verdict,
        plan.emotion.label,
        plan.gesture,
        plan.prosody.pitch,
        plan.prosody.rate,
        plan.score.adjusted
    )
}

/// Runs the console loop over arbitrary streams (tests drive it with
/// buffers; the binary passes stdin/stdout/stderr).
pub fn run(
    pipeline: &Pipeline,
    bank: &mut QuestionBank,
    input: impl BufRead,
    out: &mut impl Write,
    err: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(err, "moral compass console — ask \"should i ...?\" or \"is it okay to ...?\" (/quit to exit)")?;
    let mut session = pipeline.new_session("console");
    let mut last_turn: Option<(u64, Verdict)> = None;
    let mut current_training: Option<u64> = None;

    let mut lines = input.lines();
    loop {
        write!(err, "> ")?;
        err.flush()?;
        let Some(line) = lines.next() else { break };
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }

        if let Some(command) = line.strip_prefix('/') {
            let mut parts = command.split_whitespace();
            match parts.next() {
                Some("quit") => {
                    writeln!(out, "goodbye.")?;
                    return Ok(());
                }
                Some("stats") => match pipeline.store().stats() {
                    Ok(stats) => writeln!(
                        out,
                        "{}",
                        serde_json::to_string(&stats).expect("stats always serialize")
                    )?,
                    Err(e) => writeln!(err, "error: {e}")?,
                },
                Some("train") => {
                    if bank.is_empty() {
                        writeln!(out, "the question bank is empty.")?;
                    } else {
                        match pipeline.training_next(bank, &mut session) {
                            Ok(entry) => {
                                writeln!(out, "training: {}", entry.question)?;
                                current_training = Some(entry.bank_id);
                            }
                            Err(e) => writeln!(err, "error: {e}")?,
                        }
                    }
                }
                Some("stop") if session.mode == SessionMode::Training => {
                    session.mode = SessionMode::Live;
                    current_training = None;
                    writeln!(out, "leaving training mode.")?;
                }
                Some("feedback") => {
                    handle_feedback_command(pipeline, &mut session, last_turn, parts.next(), out, err)?;
                }
                _ => writeln!(out, "unknown command: {line}")?,
            }
            continue;
        }

        if session.mode == SessionMode::Training {
            let Some(bank_id) = current_training else {
                // Shouldn't happen; recover by leaving training mode.
                session.mode = SessionMode::Live;
                continue;
            };
            match line.parse::<Verdict>() {
                Ok(verdict) => {
                    match pipeline.ingest_training_reply(&mut session, bank, bank_id, verdict) {
                        Ok(ack) => {
                            writeln!(out, "{ack}")?;
                            match pipeline.training_next(bank, &mut session) {
                                Ok(entry) => {
                                    writeln!(out, "training: {}", entry.question)?;
                                    current_training = Some(entry.bank_id);
                                }
                                Err(e) => writeln!(err, "error: {e}")?,
                            }
                        }
                        Err(e) => writeln!(err, "error: {e}")?,
                    }
                }
                Err(_) => writeln!(out, "{TRAINING_REPLY_PROMPT}")?,
            }
            continue;
        }

        match pipeline.handle_utterance(&mut session, line) {
            Ok(plan) => {
                writeln!(out, "{}", plan.answer_text)?;
                writeln!(out, "{}", annotation(&plan))?;
                if plan.feedback_requested {
                    writeln!(out, "{FEEDBACK_PROMPT}")?;
                }
                // Clarifications aren't registered turns, so they can't
                // take feedback.
                if plan.answer_text != crate::dialog::CLARIFICATION_TEXT {
                    last_turn = Some((plan.turn_id, plan.verdict));
                }
            }
            Err(e) => writeln!(err, "error: {e}")?,
        }
    }
    Ok(())
}

fn handle_feedback_command(
    pipeline: &Pipeline,
    session: &mut Session,
    last_turn: Option<(u64, Verdict)>,
    arg: Option<&str>,
    out: &mut impl Write,
    err: &mut impl Write,
) -> std::io::Result<()> {
    let Some((turn_id, answered_verdict)) = last_turn else {
        writeln!(out, "nothing to give feedback on yet.")?;
        return Ok(());
    };
    let (agrees, alternative) = match arg {
        Some("agree") => (true, None),
        Some(word) => match word.parse::<Verdict>() {
            // Naming the verdict the system already gave counts as
            // agreement; a different one is a correction.
            Ok(v) => (v == answered_verdict, Some(v)),
            Err(_) => {
                writeln!(out, "{FEEDBACK_USAGE}")?;
                return Ok(());
            }
        },
        None => {
            writeln!(out, "{FEEDBACK_USAGE}")?;
            return Ok(());
        }
    };
    match pipeline.handle_feedback(session, turn_id, agrees, alternative) {
        Ok(ack) => writeln!(out, "{ack}")?,
        Err(e) => writeln!(err, "error: {e}")?,
    }
    Ok(())
}

/// Console entry point for the binary: builds the stack from `config`
/// and wires the standard streams.
pub fn run_with_stdio(config: &Config) -> Result<()> {
    let (pipeline, mut bank) = build_stack(config)?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    run(&pipeline, &mut bank, stdin.lock(), &mut stdout, &mut stderr)?;
    Ok(())
}
