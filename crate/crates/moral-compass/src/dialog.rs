//! Turn orchestration: parse → score → adapt → verdict → emotion →
//! annotated response plan. Also owns feedback solicitation (a seeded
//! coin flip per answered turn), feedback handling, and the training
//! mode that walks a question bank.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::adaptation::{adjusted_score, AdaptationEngine, FeedbackRecord, FeedbackSource};
use crate::embedding::{cosine, splitmix64, unit_interval, TextEmbedder};
use crate::error::{Error, Result};
use crate::moral::{
    parse_question, render_answer_pair, render_neutral_answer, verdict_for, EmotionAssessment,
    EmotionClassifier, EmotionLabel, MoralScore, ParsedQuestion, Verdict, VerdictThresholds,
};
use crate::store::{now_millis, QueryLogRecord, Store};

pub const CLARIFICATION_TEXT: &str =
    "i did not understand. please ask, for example: should i ...?";
pub const ACK_AGREE: &str = "glad we agree.";
pub const ACK_DISAGREE: &str = "thank you, i will remember that.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionMode {
    Live,
    Training,
}

/// Per-user conversation state. Turn ids are 1-based and strictly
/// increasing; the turn registry lets feedback target any earlier
/// answered turn, not just the most recent.
pub struct Session {
    pub id: String,
    pub turn_counter: u64,
    pub rng_state: u64,
    pub pending_feedback_turn: Option<u64>,
    pub mode: SessionMode,
    turns: HashMap<u64, TurnInfo>,
}

struct TurnInfo {
    parsed: ParsedQuestion,
    base_normalized: f64,
}

impl Session {
    pub fn new(id: impl Into<String>, rng_seed: u64) -> Self {
        Self {
            id: id.into(),
            turn_counter: 0,
            rng_state: rng_seed,
            pending_feedback_turn: None,
            mode: SessionMode::Live,
            turns: HashMap::new(),
        }
    }
}

/// Head movement accompanying an answer; locked to the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gesture {
    Nod,
    Shake,
    Tilt,
}

impl Gesture {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gesture::Nod => "Nod",
            Gesture::Shake => "Shake",
            Gesture::Tilt => "Tilt",
        }
    }
}

impl std::fmt::Display for Gesture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn gesture_for(verdict: Verdict) -> Gesture {
    match verdict {
        Verdict::Yes => Gesture::Nod,
        Verdict::No => Gesture::Shake,
        Verdict::Neutral => Gesture::Tilt,
    }
}

/// Voice multipliers relative to a neutral baseline of 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prosody {
    pub pitch: f64,
    pub rate: f64,
}

/// Pitch/rate per emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyTable {
    entries: [Prosody; EmotionLabel::ALL.len()],
}

impl ProsodyTable {
    pub fn new(entries: [(EmotionLabel, Prosody); EmotionLabel::ALL.len()]) -> Result<Self> {
        let mut table = [Prosody { pitch: 1.0, rate: 1.0 }; EmotionLabel::ALL.len()];
        for label in EmotionLabel::ALL {
            let (_, prosody) = entries
                .iter()
                .find(|(l, _)| *l == label)
                .ok_or(Error::MissingPrototype(label))?;
            table[Self::index(label)] = *prosody;
        }
        Ok(Self { entries: table })
    }

    fn index(label: EmotionLabel) -> usize {
        EmotionLabel::ALL
            .iter()
            .position(|l| *l == label)
            .expect("ALL covers every label")
    }

    pub fn get(&self, label: EmotionLabel) -> Prosody {
        self.entries[Self::index(label)]
    }

    pub fn set(&mut self, label: EmotionLabel, prosody: Prosody) {
        self.entries[Self::index(label)] = prosody;
    }

    pub fn validate(&self) -> Result<()> {
        for label in EmotionLabel::ALL {
            let p = self.get(label);
            for (part, value) in [("pitch", p.pitch), ("rate", p.rate)] {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::InvalidValue {
                        key: format!("prosody.{}.{part}", label.as_str().to_ascii_lowercase()),
                        constraint: "must be a positive number".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl Default for ProsodyTable {
    fn default() -> Self {
        Self::new([
            (EmotionLabel::Anger, Prosody { pitch: 0.9, rate: 1.10 }),
            (EmotionLabel::Confusion, Prosody { pitch: 1.0, rate: 0.90 }),
            (EmotionLabel::Disgust, Prosody { pitch: 0.95, rate: 0.95 }),
            (EmotionLabel::Fear, Prosody { pitch: 1.10, rate: 1.15 }),
            (EmotionLabel::Joy, Prosody { pitch: 1.10, rate: 1.05 }),
            (EmotionLabel::Sadness, Prosody { pitch: 0.90, rate: 0.85 }),
            (EmotionLabel::Satisfaction, Prosody { pitch: 1.05, rate: 1.00 }),
            (EmotionLabel::Surprise, Prosody { pitch: 1.15, rate: 1.10 }),
        ])
        .expect("default table covers every label")
    }
}

/// Base, correction-applied, and their raw source value for one answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub raw: f64,
    pub normalized: f64,
    pub adjusted: f64,
}

/// Everything needed to deliver one answer: words, verdict, affect,
/// head movement, voice settings, and whether feedback was requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponsePlan {
    pub turn_id: u64,
    pub answer_text: String,
    pub verdict: Verdict,
    pub score: ScoreBreakdown,
    pub emotion: EmotionAssessment,
    /// Face tag; equals the emotion label's name.
    pub expression: String,
    pub gesture: Gesture,
    pub prosody: Prosody,
    pub feedback_requested: bool,
}

/// Tunables for the dialog loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogSettings {
    pub thresholds: VerdictThresholds,
    /// Probability of asking "do you agree?" after an answer.
    pub feedback_probability: f64,
    /// Initial rng_state for each new session's solicitation stream.
    pub feedback_seed: u64,
    pub prosody: ProsodyTable,
    pub prototypes: Vec<(EmotionLabel, String)>,
}

impl Default for DialogSettings {
    fn default() -> Self {
        Self {
            thresholds: VerdictThresholds::default(),
            feedback_probability: 0.3,
            feedback_seed: 42,
            prosody: ProsodyTable::default(),
            prototypes: crate::moral::default_prototypes(),
        }
    }
}

impl DialogSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.feedback_probability.is_finite()
            && (0.0..=1.0).contains(&self.feedback_probability))
        {
            return Err(Error::InvalidValue {
                key: "feedback.probability".into(),
                constraint: "must be in [0, 1]".into(),
            });
        }
        self.prosody.validate()
    }
}

/// Seeded coin flip: one SplitMix64 step of the session's rng state,
/// mapped to [0, 1) and compared against `p`. Deterministic given the
/// seed and how many flips preceded this one.
pub fn should_solicit_feedback(session: &mut Session, p: f64) -> bool {
    let z = splitmix64(&mut session.rng_state);
    unit_interval(z) < p
}

/// The answer sentence for a verdict: the scored yes/no phrasing, or
/// the template's indecisive phrasing.
pub fn compose_answer(verdict: Verdict, parsed: &ParsedQuestion) -> String {
    let (yes, no) = render_answer_pair(parsed);
    match verdict {
        Verdict::Yes => yes,
        Verdict::No => no,
        Verdict::Neutral => render_neutral_answer(parsed),
    }
}

/// The assembled question-answering stack: embedding backend, feedback
/// set, persistence, and dialog tunables.
pub struct Pipeline {
    embedder: Arc<dyn TextEmbedder>,
    engine: Arc<AdaptationEngine>,
    store: Arc<Store>,
    classifier: EmotionClassifier,
    settings: DialogSettings,
}

impl Pipeline {
    pub fn new(
        embedder: Arc<dyn TextEmbedder>,
        engine: Arc<AdaptationEngine>,
        store: Arc<Store>,
        settings: DialogSettings,
    ) -> Result<Self> {
        settings.validate()?;
        engine.params().validate(settings.thresholds.neutral_band)?;
        let classifier = EmotionClassifier::new(embedder.as_ref(), &settings.prototypes)?;
        Ok(Self {
            embedder,
            engine,
            store,
            classifier,
            settings,
        })
    }

    pub fn embedder(&self) -> &dyn TextEmbedder {
        self.embedder.as_ref()
    }

    pub fn engine(&self) -> &AdaptationEngine {
        &self.engine
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn settings(&self) -> &DialogSettings {
        &self.settings
    }

    pub fn new_session(&self, id: impl Into<String>) -> Session {
        Session::new(id, self.settings.feedback_seed)
    }

    /// Warms the feedback set from the store (embeddings recomputed).
    /// Returns the number of lines that could not be loaded.
    pub fn reload_feedback(&self) -> Result<usize> {
        let outcome = self.store.load_feedback_all(self.embedder.as_ref())?;
        self.engine.replace(outcome.records);
        Ok(outcome.skipped)
    }

    /// One full turn. Unrecognized utterances get a clarification plan
    /// (Neutral verdict, Confusion affect, zero scores) that is not
    /// logged and cannot receive feedback; recognized questions are
    /// scored, adapted, answered, and appended to the query log.
    pub fn handle_utterance(&self, session: &mut Session, text: &str) -> Result<ResponsePlan> {
        session.turn_counter += 1;
        let turn_id = session.turn_counter;

        let parsed = match parse_question(text) {
            Ok(parsed) => parsed,
            Err(Error::NoTemplateMatch) => return Ok(self.clarification_plan(turn_id)),
            Err(e) => return Err(e),
        };

        let canonical = parsed.canonical();
        let (yes_answer, no_answer) = render_answer_pair(&parsed);
        let vectors = self
            .embedder
            .embed_batch(&[&canonical, &yes_answer, &no_answer])?;
        let e_q = &vectors[0];
        let raw = cosine(e_q, &vectors[1])? - cosine(e_q, &vectors[2])?;
        let base = MoralScore::from_raw(raw);

        let delta = self.engine.correction(e_q, base.normalized)?;
        let adjusted = adjusted_score(base.normalized, delta);
        let verdict = verdict_for(adjusted, self.settings.thresholds);
        let emotion = self.classifier.classify(e_q)?;

        let feedback_requested =
            should_solicit_feedback(session, self.settings.feedback_probability);
        if feedback_requested {
            session.pending_feedback_turn = Some(turn_id);
        }

        self.store.append_query(&QueryLogRecord {
            id: 0,
            timestamp: now_millis(),
            session_id: session.id.clone(),
            utterance_raw: text.to_string(),
            canonical_question: canonical,
            template_id: parsed.template,
            action: parsed.action.clone(),
            raw_score: base.raw,
            normalized_score: base.normalized,
            adjusted_score: adjusted,
            verdict,
            emotion_label: emotion.label,
            feedback_requested,
        })?;

        let plan = ResponsePlan {
            turn_id,
            answer_text: compose_answer(verdict, &parsed),
            verdict,
            score: ScoreBreakdown {
                raw: base.raw,
                normalized: base.normalized,
                adjusted,
            },
            emotion,
            expression: emotion.label.as_str().to_string(),
            gesture: gesture_for(verdict),
            prosody: self.settings.prosody.get(emotion.label),
            feedback_requested,
        };

        session.turns.insert(
            turn_id,
            TurnInfo {
                parsed,
                base_normalized: base.normalized,
            },
        );
        Ok(plan)
    }

    fn clarification_plan(&self, turn_id: u64) -> ResponsePlan {
        ResponsePlan {
            turn_id,
            answer_text: CLARIFICATION_TEXT.to_string(),
            verdict: Verdict::Neutral,
            score: ScoreBreakdown {
                raw: 0.0,
                normalized: 0.0,
                adjusted: 0.0,
            },
            emotion: EmotionAssessment {
                label: EmotionLabel::Confusion,
                similarity: 0.0,
            },
            expression: EmotionLabel::Confusion.as_str().to_string(),
            gesture: Gesture::Tilt,
            prosody: self.settings.prosody.get(EmotionLabel::Confusion),
            feedback_requested: false,
        }
    }

    /// Records the user's reaction to an answered turn. A disagreement
    /// with an alternative verdict starts influencing scores at once; a
    /// bare disagreement (or an agreement) is logged for statistics
    /// only. The alternative is ignored when the user agrees.
    pub fn handle_feedback(
        &self,
        session: &mut Session,
        turn_id: u64,
        agrees: bool,
        alternative: Option<Verdict>,
    ) -> Result<&'static str> {
        let info = session
            .turns
            .get(&turn_id)
            .ok_or(Error::UnknownTurn(turn_id))?;
        let canonical = info.parsed.canonical();
        let embedding = self.embedder.embed(&canonical)?;
        let record = FeedbackRecord::new(
            canonical,
            embedding,
            info.base_normalized,
            agrees,
            if agrees { None } else { alternative },
            FeedbackSource::Live,
            self.engine.params(),
        )?;
        self.engine.ingest_feedback(record, &self.store)?;
        session.pending_feedback_turn = None;
        Ok(if agrees { ACK_AGREE } else { ACK_DISAGREE })
    }

    /// Picks the next training question: least-asked first, ties to the
    /// lexicographically smallest question. Marks it asked and puts the
    /// session in training mode.
    pub fn training_next(
        &self,
        bank: &mut QuestionBank,
        session: &mut Session,
    ) -> Result<QuestionBankEntry> {
        session.mode = SessionMode::Training;
        bank.next()
    }

    /// Ingests a training reply: the system scores the bank question
    /// silently, compares its own verdict with the user's, and stores
    /// the result as training-sourced feedback (a disagreement carries
    /// the user's verdict as target).
    pub fn ingest_training_reply(
        &self,
        session: &mut Session,
        bank: &QuestionBank,
        bank_id: u64,
        user_verdict: Verdict,
    ) -> Result<&'static str> {
        let entry = bank
            .get(bank_id)
            .ok_or(Error::UnknownBankEntry(bank_id))?;
        let parsed = parse_question(&entry.question)?;
        let canonical = parsed.canonical();
        let (yes_answer, no_answer) = render_answer_pair(&parsed);
        let vectors = self
            .embedder
            .embed_batch(&[&canonical, &yes_answer, &no_answer])?;
        let e_q = &vectors[0];
        let raw = cosine(e_q, &vectors[1])? - cosine(e_q, &vectors[2])?;
        let base = MoralScore::from_raw(raw);
        let adjusted = adjusted_score(base.normalized, self.engine.correction(e_q, base.normalized)?);
        let system_verdict = verdict_for(adjusted, self.settings.thresholds);

        let agrees = user_verdict == system_verdict;
        let record = FeedbackRecord::new(
            canonical,
            vectors.into_iter().next().expect("three vectors"),
            base.normalized,
            agrees,
            (!agrees).then_some(user_verdict),
            FeedbackSource::Training,
            self.engine.params(),
        )?;
        self.engine.ingest_feedback(record, &self.store)?;
        let _ = session;
        Ok(if agrees { ACK_AGREE } else { ACK_DISAGREE })
    }
}

/// One question from the training bank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionBankEntry {
    pub bank_id: u64,
    pub question: String,
    pub times_asked: u64,
    pub last_asked: Option<DateTime<Utc>>,
}

/// The training-mode question list, loaded from a plain-text file: one
/// question per line, `#` lines are comments, blank lines ignored.
/// Every entry must parse under the question templates.
#[derive(Debug)]
pub struct QuestionBank {
    entries: Vec<QuestionBankEntry>,
}

impl QuestionBank {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::Io(e)
            }
        })?;
        let mut entries = Vec::new();
        for (index, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parsed =
                parse_question(trimmed).map_err(|_| Error::BankEntryUnparseable {
                    path: path.to_path_buf(),
                    line: index + 1,
                })?;
            entries.push(QuestionBankEntry {
                bank_id: entries.len() as u64 + 1,
                question: parsed.canonical(),
                times_asked: 0,
                last_asked: None,
            });
        }
        Ok(Self { entries })
    }

    pub fn from_questions<I: IntoIterator<Item = S>, S: AsRef<str>>(questions: I) -> Result<Self> {
        let mut entries = Vec::new();
        for q in questions {
            let parsed = parse_question(q.as_ref())?;
            entries.push(QuestionBankEntry {
                bank_id: entries.len() as u64 + 1,
                question: parsed.canonical(),
                times_asked: 0,
                last_asked: None,
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QuestionBankEntry] {
        &self.entries
    }

    pub fn get(&self, bank_id: u64) -> Option<&QuestionBankEntry> {
        self.entries.iter().find(|e| e.bank_id == bank_id)
    }

    /// Least-asked entry, ties broken by question text; bumps its
    /// counter and timestamp.
    pub fn next(&mut self) -> Result<QuestionBankEntry> {
        let index = self
            .entries
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.times_asked
                    .cmp(&b.times_asked)
                    .then_with(|| a.question.cmp(&b.question))
            })
            .map(|(i, _)| i)
            .ok_or(Error::EmptyBank)?;
        let entry = &mut self.entries[index];
        entry.times_asked += 1;
        entry.last_asked = Some(now_millis());
        Ok(entry.clone())
    }
}
