//! Online score adaptation from user feedback.
//!
//! Disagreements that carry an alternative verdict become feedback
//! records with a target score. When a later question lands close to a
//! recorded one (cosine above `tau`), its base score is pulled toward
//! the kernel-weighted mean of the nearby targets — proportionally to
//! the best similarity, so an exact repeat adopts its target outright
//! while a merely related question moves only part of the way.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EmbeddingVector};
use crate::error::{Error, Result};
use crate::moral::Verdict;
use crate::store::{now_millis, Store};

/// Where a feedback record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackSource {
    Live,
    Training,
}

/// One remembered reaction to an answer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackRecord {
    /// Store-assigned, 0 until persisted.
    pub id: u64,
    pub timestamp: DateTime<Utc>,
    pub question_canonical: String,
    pub question_embedding: EmbeddingVector,
    /// The unadapted normalized score the answer was based on.
    pub base_normalized: f64,
    pub agrees: bool,
    pub alternative_verdict: Option<Verdict>,
    /// Derived from `alternative_verdict`; present iff it is.
    pub target_score: Option<f64>,
    pub source: FeedbackSource,
}

impl FeedbackRecord {
    /// Builds a record with a fresh timestamp, deriving `target_score`
    /// from the alternative verdict (if any) via `params`.
    pub fn new(
        question_canonical: impl Into<String>,
        question_embedding: EmbeddingVector,
        base_normalized: f64,
        agrees: bool,
        alternative_verdict: Option<Verdict>,
        source: FeedbackSource,
        params: &AdaptationParams,
    ) -> Result<Self> {
        let record = Self {
            id: 0,
            timestamp: now_millis(),
            question_canonical: question_canonical.into(),
            question_embedding,
            base_normalized,
            agrees,
            alternative_verdict,
            target_score: alternative_verdict.map(|v| target_from_verdict(v, params)),
            source,
        };
        record.validate(params)?;
        Ok(record)
    }

    pub fn validate(&self, params: &AdaptationParams) -> Result<()> {
        if !(self.base_normalized.is_finite() && self.base_normalized.abs() <= 1.0) {
            return Err(Error::InvalidFeedback("base score must be in [-1, 1]"));
        }
        match (self.alternative_verdict, self.target_score) {
            (None, None) => {}
            (Some(v), Some(t)) => {
                if t != target_from_verdict(v, params) {
                    return Err(Error::InvalidFeedback(
                        "target score does not match the alternative verdict",
                    ));
                }
            }
            _ => {
                return Err(Error::InvalidFeedback(
                    "target score and alternative verdict must come together",
                ));
            }
        }
        Ok(())
    }

    /// Whether this record pulls future scores (agreements never do).
    pub fn is_active(&self) -> bool {
        self.target_score.is_some()
    }
}

/// Target scores, one per verdict a user can assert.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetScores {
    pub yes: f64,
    pub no: f64,
    pub neutral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationParams {
    /// Similarity cutoff: records at or below it have no influence.
    pub tau: f64,
    pub targets: TargetScores,
}

impl Default for AdaptationParams {
    fn default() -> Self {
        Self {
            tau: 0.85,
            targets: TargetScores {
                yes: 0.6,
                no: -0.6,
                neutral: 0.0,
            },
        }
    }
}

impl AdaptationParams {
    /// Checks internal consistency and that the targets land on the
    /// right side of the verdict thresholds.
    pub fn validate(&self, neutral_band: f64) -> Result<()> {
        if !(self.tau.is_finite() && 0.0 < self.tau && self.tau < 1.0) {
            return Err(Error::InvalidValue {
                key: "adaptation.tau".into(),
                constraint: "must be in (0, 1)".into(),
            });
        }
        let t = self.targets;
        for (key, value) in [
            ("adaptation.targets.yes", t.yes),
            ("adaptation.targets.no", t.no),
            ("adaptation.targets.neutral", t.neutral),
        ] {
            if !(value.is_finite() && value.abs() <= 1.0) {
                return Err(Error::InvalidValue {
                    key: key.into(),
                    constraint: "must be in [-1, 1]".into(),
                });
            }
        }
        if t.yes <= neutral_band {
            return Err(Error::InvalidValue {
                key: "adaptation.targets.yes".into(),
                constraint: "must exceed the neutral band".into(),
            });
        }
        if t.no >= -neutral_band {
            return Err(Error::InvalidValue {
                key: "adaptation.targets.no".into(),
                constraint: "must fall below the neutral band".into(),
            });
        }
        if t.neutral.abs() > neutral_band {
            return Err(Error::InvalidValue {
                key: "adaptation.targets.neutral".into(),
                constraint: "must lie inside the neutral band".into(),
            });
        }
        Ok(())
    }
}

pub fn target_from_verdict(v: Verdict, params: &AdaptationParams) -> f64 {
    match v {
        Verdict::Yes => params.targets.yes,
        Verdict::No => params.targets.no,
        Verdict::Neutral => params.targets.neutral,
    }
}

/// The score correction Δ for a question embedding against a feedback
/// set. Pure: same inputs, same output. Records without a target score
/// are ignored.
pub fn correction(
    e_q: &EmbeddingVector,
    base: f64,
    feedback: &[FeedbackRecord],
    params: &AdaptationParams,
) -> Result<f64> {
    let mut k_sum = 0.0;
    let mut k_max = 0.0;
    let mut weighted_targets = 0.0;
    for record in feedback {
        let Some(target) = record.target_score else {
            continue;
        };
        let sim = cosine(e_q, &record.question_embedding)?;
        let k = ((sim - params.tau) / (1.0 - params.tau)).max(0.0);
        k_sum += k;
        weighted_targets += k * target;
        if k > k_max {
            k_max = k;
        }
    }
    if k_sum == 0.0 {
        return Ok(0.0);
    }
    let t_bar = weighted_targets / k_sum;
    Ok((t_bar - base) * k_max)
}

/// Applies a correction, keeping the result in score range.
pub fn adjusted_score(base: f64, delta: f64) -> f64 {
    (base + delta).clamp(-1.0, 1.0)
}

/// Shared, concurrently readable feedback set plus its parameters.
///
/// Readers take a cheap snapshot (`Arc` clone) and compute outside the
/// lock, so a query in flight sees the set as of its start.
pub struct AdaptationEngine {
    params: AdaptationParams,
    active: RwLock<Arc<Vec<FeedbackRecord>>>,
}

impl AdaptationEngine {
    pub fn new(params: AdaptationParams) -> Self {
        Self {
            params,
            active: RwLock::new(Arc::new(Vec::new())),
        }
    }

    pub fn params(&self) -> &AdaptationParams {
        &self.params
    }

    /// Number of records currently influencing scores.
    pub fn active_len(&self) -> usize {
        self.active.read().len()
    }

    pub fn snapshot(&self) -> Arc<Vec<FeedbackRecord>> {
        Arc::clone(&self.active.read())
    }

    pub fn correction(&self, e_q: &EmbeddingVector, base: f64) -> Result<f64> {
        correction(e_q, base, &self.snapshot(), &self.params)
    }

    pub fn adjust(&self, e_q: &EmbeddingVector, base: f64) -> Result<f64> {
        Ok(adjusted_score(base, self.correction(e_q, base)?))
    }

    /// Persists a record and, if it carries a target, makes it visible
    /// to subsequent corrections. Returns the store-assigned id.
    pub fn ingest_feedback(&self, mut record: FeedbackRecord, store: &Store) -> Result<u64> {
        record.validate(&self.params)?;
        let id = store.append_feedback(&record)?;
        record.id = id;
        self.ingest(record);
        Ok(id)
    }

    /// In-memory ingestion (also the reload path). Inactive records are
    /// dropped here; the store keeps the full history.
    pub fn ingest(&self, record: FeedbackRecord) {
        if !record.is_active() {
            return;
        }
        let mut active = self.active.write();
        let mut next = Vec::with_capacity(active.len() + 1);
        next.extend(active.iter().cloned());
        next.push(record);
        *active = Arc::new(next);
    }

    /// Replaces the active set with the active subset of `records`.
    pub fn replace(&self, records: Vec<FeedbackRecord>) {
        let mut filtered: Vec<FeedbackRecord> =
            records.into_iter().filter(FeedbackRecord::is_active).collect();
        filtered.shrink_to_fit();
        *self.active.write() = Arc::new(filtered);
    }
}
