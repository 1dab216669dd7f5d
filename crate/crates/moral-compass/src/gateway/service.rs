//! The assembled application behind the HTTP handlers and the console:
//! one pipeline, a session registry, and the training bank.
//!
//! Construction is where startup checks live: config validation, store
//! opening, feedback reload, remote health probe when selected, and an
//! embedding self-test. A `Service` that constructed successfully is
//! ready to answer.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::Mutex;

use crate::adaptation::AdaptationEngine;
use crate::dialog::{Pipeline, QuestionBank, QuestionBankEntry, ResponsePlan, Session};
use crate::embedding::{probe_health, BackendKind, Embedder, TextEmbedder};
use crate::error::{Error, Result};
use crate::moral::Verdict;
use crate::store::{Stats, Store};

use super::config::Config;

/// Builds the dialog stack a config describes: embedder (with backend
/// health probe), store, adaptation engine warmed from disk, and the
/// question bank (empty when its file does not exist yet).
pub fn build_stack(config: &Config) -> Result<(Pipeline, QuestionBank)> {
    config.validate()?;
    if config.backend == BackendKind::Remote {
        let endpoint = config.endpoint.as_deref().expect("validated");
        probe_health(endpoint)?;
    }
    let embedder: Arc<dyn TextEmbedder> =
        Arc::new(Embedder::with_cache(config.descriptor(), config.cache_policy())?);
    let store = Arc::new(Store::open(&config.storage_dir)?);
    let engine = Arc::new(AdaptationEngine::new(config.adaptation));
    let pipeline = Pipeline::new(embedder, engine, store, config.dialog_settings())?;
    let skipped = pipeline.reload_feedback()?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} unreadable feedback line(s)");
    }

    let bank = if config.bank_path.exists() {
        QuestionBank::load(&config.bank_path)?
    } else {
        QuestionBank::from_questions(Vec::<String>::new())?
    };

    // Self-test: prove the embedding path end to end before reporting
    // ready.
    pipeline.embedder().embed("healthcheck")?;
    Ok((pipeline, bank))
}

pub struct Service {
    pipeline: Pipeline,
    bank: Mutex<QuestionBank>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

impl Service {
    pub fn new(config: &Config) -> Result<Self> {
        let (pipeline, bank) = build_stack(config)?;
        Ok(Self {
            pipeline,
            bank: Mutex::new(bank),
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        })
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn create_session(&self) -> String {
        let id = format!("s-{}", self.next_session.fetch_add(1, Ordering::Relaxed));
        let session = self.pipeline.new_session(id.clone());
        self.sessions
            .lock()
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    /// Answers one utterance. Turns within a session serialize on the
    /// session lock; different sessions proceed concurrently.
    pub fn ask(&self, session_id: &str, utterance: &str) -> Result<ResponsePlan> {
        let session = self.session(session_id)?;
        let mut session = session.lock();
        self.pipeline.handle_utterance(&mut session, utterance)
    }

    pub fn feedback(
        &self,
        session_id: &str,
        turn_id: u64,
        agrees: bool,
        alternative: Option<Verdict>,
    ) -> Result<&'static str> {
        let session = self.session(session_id)?;
        let mut session = session.lock();
        self.pipeline
            .handle_feedback(&mut session, turn_id, agrees, alternative)
    }

    pub fn training_next(&self, session_id: &str) -> Result<QuestionBankEntry> {
        let session = self.session(session_id)?;
        let mut session = session.lock();
        let mut bank = self.bank.lock();
        self.pipeline.training_next(&mut bank, &mut session)
    }

    pub fn training_answer(
        &self,
        session_id: &str,
        bank_id: u64,
        verdict: Verdict,
    ) -> Result<&'static str> {
        let session = self.session(session_id)?;
        let mut session = session.lock();
        let bank = self.bank.lock();
        self.pipeline
            .ingest_training_reply(&mut session, &bank, bank_id, verdict)
    }

    pub fn stats(&self) -> Result<Stats> {
        self.pipeline.store().stats()
    }
}
