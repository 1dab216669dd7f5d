//! A moral-compass question answerer.
//!
//! Ask it "should i ...?" or "is it okay to ...?" and it answers yes,
//! no, or that it is indecisive — with an emotion, a head gesture, and
//! voice prosody attached, the way an embodied social robot would
//! deliver it. The verdict comes from comparing sentence embeddings:
//! the question is scored by how much closer it sits to the rendered
//! "yes" answer than to the "no" answer. Users can push back; accepted
//! corrections persist and pull future scores for similar questions.
//!
//! The pieces:
//!
//! - [`embedding`] — text → unit vector, via a bit-exact deterministic
//!   hash backend or a remote encoder service, behind one cache.
//! - [`moral`] — question templates, the yes/no bias score, verdict
//!   thresholds, emotion classification against prototype sentences.
//! - [`adaptation`] — similarity-kernel score corrections learned from
//!   disagreements.
//! - [`dialog`] — the turn pipeline, feedback solicitation, training
//!   mode over a question bank.
//! - [`store`] — append-only JSON-lines logs and statistics.
//! - [`gateway`] — config file, HTTP API, interactive console.
//!
//! The `examples/` directory is the front door: one runnable example
//! per capability (`cargo run --example ask_once`, `feedback_loop`,
//! `training_mode`, `serve_api`, `console`, `remote_backend`,
//! `stats_report`). A thin `moral-compass` binary wraps the console
//! and the HTTP server for deployment.

pub mod adaptation;
pub mod dialog;
pub mod embedding;
pub mod error;
pub mod gateway;
pub mod moral;
pub mod store;

pub use adaptation::{
    adjusted_score, correction, target_from_verdict, AdaptationEngine, AdaptationParams,
    FeedbackRecord, FeedbackSource, TargetScores,
};
pub use dialog::{
    compose_answer, gesture_for, should_solicit_feedback, DialogSettings, Gesture, Pipeline,
    Prosody, ProsodyTable, QuestionBank, QuestionBankEntry, ResponsePlan, ScoreBreakdown, Session,
    SessionMode,
};
pub use embedding::{
    cosine, normalize_text, probe_health, BackendDescriptor, BackendKind, CachePolicy, Embedder,
    EmbeddingVector, TextEmbedder, DEFAULT_CACHE_CAPACITY, DEFAULT_DIM,
};
pub use error::{Error, Result};
pub use gateway::{build_stack, serve, start, Config, RunningServer, Service};
pub use moral::{
    default_prototypes, moral_score, parse_question, render_answer_pair, render_neutral_answer,
    score_against_pair, verdict, verdict_for, EmotionAssessment, EmotionClassifier, EmotionLabel,
    MoralScore, ParsedQuestion, QuestionTemplate, TemplateId, Verdict, VerdictThresholds,
};
pub use store::{LoadOutcome, QueryLogRecord, Stats, Store, VerdictCounts};
