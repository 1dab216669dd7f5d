//! The moral core: question templates, the bias score between a yes and
//! a no answer, verdict thresholds, and emotion annotation.
//!
//! A question is answered by embedding it together with both candidate
//! answers and taking the difference of the cosine similarities. The
//! sign and magnitude of that difference drive the verdict; the nearest
//! emotion prototype colors how the answer is delivered.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, normalize_text, EmbeddingVector, TextEmbedder};
use crate::error::{Error, Result};

/// The question shapes the system understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    ShouldI,
    IsItOkayTo,
}

/// Prefix-matching rule plus the answer phrasings for one template.
#[derive(Debug, Clone, Copy)]
pub struct QuestionTemplate {
    pub id: TemplateId,
    /// Accepted normalized prefixes, most canonical first.
    pub prefixes: &'static [&'static str],
    /// Pattern of the canonical question form, e.g. `should i {action}?`.
    pub canonical: &'static str,
    pub yes_pattern: &'static str,
    pub no_pattern: &'static str,
    pub neutral_pattern: &'static str,
}

pub const TEMPLATES: &[QuestionTemplate] = &[
    QuestionTemplate {
        id: TemplateId::ShouldI,
        prefixes: &["should i "],
        canonical: "should i {action}?",
        yes_pattern: "yes, you should {action}.",
        no_pattern: "no, you should not {action}.",
        neutral_pattern: "i am indecisive about whether you should {action}.",
    },
    QuestionTemplate {
        id: TemplateId::IsItOkayTo,
        prefixes: &["is it okay to ", "is it ok to "],
        canonical: "is it okay to {action}?",
        yes_pattern: "yes, it is okay to {action}.",
        no_pattern: "no, it is not okay to {action}.",
        neutral_pattern: "i am indecisive about whether it is okay to {action}.",
    },
];

pub fn template(id: TemplateId) -> &'static QuestionTemplate {
    TEMPLATES
        .iter()
        .find(|t| t.id == id)
        .expect("every TemplateId has a TEMPLATES entry")
}

/// A recognized question, reduced to its template and action phrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuestion {
    pub template: TemplateId,
    /// Normalized action phrase: non-empty, no trailing `?` or `.`.
    pub action: String,
}

impl ParsedQuestion {
    /// Canonical question form, e.g. `should i kill time?`.
    pub fn canonical(&self) -> String {
        fill(template(self.template).canonical, &self.action)
    }
}

fn fill(pattern: &str, action: &str) -> String {
    pattern.replace("{action}", action)
}

/// Matches an utterance against the known templates. The text is
/// normalized, a matching prefix is removed, and one trailing `?` or
/// `.` is stripped from the remainder. Anything that leaves no action,
/// or an action still ending in `?`/`.`, is not a match.
pub fn parse_question(utterance: &str) -> Result<ParsedQuestion> {
    let normalized = normalize_text(utterance);
    for tpl in TEMPLATES {
        for prefix in tpl.prefixes {
            if let Some(rest) = normalized.strip_prefix(prefix) {
                let action = rest
                    .strip_suffix(['?', '.'])
                    .unwrap_or(rest)
                    .trim_end()
                    .to_string();
                if action.is_empty() || action.ends_with(['?', '.']) {
                    return Err(Error::NoTemplateMatch);
                }
                return Ok(ParsedQuestion {
                    template: tpl.id,
                    action,
                });
            }
        }
    }
    Err(Error::NoTemplateMatch)
}

/// The yes and no answers a parsed question is scored between.
pub fn render_answer_pair(parsed: &ParsedQuestion) -> (String, String) {
    let tpl = template(parsed.template);
    (
        fill(tpl.yes_pattern, &parsed.action),
        fill(tpl.no_pattern, &parsed.action),
    )
}

pub fn render_neutral_answer(parsed: &ParsedQuestion) -> String {
    fill(template(parsed.template).neutral_pattern, &parsed.action)
}

/// Moral bias of a question: positive favors the yes answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoralScore {
    /// cos(question, yes) - cos(question, no), in [-2, 2].
    pub raw: f64,
    /// `raw / 2`, in [-1, 1].
    pub normalized: f64,
}

impl MoralScore {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            normalized: raw / 2.0,
        }
    }
}

/// Scores arbitrary text against an explicit answer pair.
pub fn score_against_pair(
    embedder: &dyn TextEmbedder,
    question: &str,
    yes_answer: &str,
    no_answer: &str,
) -> Result<MoralScore> {
    let vectors = embedder.embed_batch(&[question, yes_answer, no_answer])?;
    let raw = cosine(&vectors[0], &vectors[1])? - cosine(&vectors[0], &vectors[2])?;
    Ok(MoralScore::from_raw(raw))
}

/// Scores a parsed question between its template's yes and no answers.
pub fn moral_score(embedder: &dyn TextEmbedder, parsed: &ParsedQuestion) -> Result<MoralScore> {
    let (yes, no) = render_answer_pair(parsed);
    score_against_pair(embedder, &parsed.canonical(), &yes, &no)
}

/// Width of the closed neutral interval around zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictThresholds {
    pub neutral_band: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        Self { neutral_band: 0.1 }
    }
}

impl VerdictThresholds {
    pub fn new(neutral_band: f64) -> Result<Self> {
        if !(neutral_band.is_finite() && (0.0..1.0).contains(&neutral_band)) {
            return Err(Error::InvalidValue {
                key: "thresholds.neutral_band".into(),
                constraint: "must be in [0, 1)".into(),
            });
        }
        Ok(Self { neutral_band })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
    Neutral,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Yes => "Yes",
            Verdict::No => "No",
            Verdict::Neutral => "Neutral",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize_text(s).as_str() {
            "yes" => Ok(Verdict::Yes),
            "no" => Ok(Verdict::No),
            "neutral" => Ok(Verdict::Neutral),
            _ => Err(Error::InvalidFeedback("expected yes, no, or neutral")),
        }
    }
}

/// Thresholds a normalized score: the neutral band is closed on both
/// ends, so exactly ±band is still Neutral.
pub fn verdict_for(normalized_score: f64, thresholds: VerdictThresholds) -> Verdict {
    if normalized_score < -thresholds.neutral_band {
        Verdict::No
    } else if normalized_score > thresholds.neutral_band {
        Verdict::Yes
    } else {
        Verdict::Neutral
    }
}

pub fn verdict(normalized_score: f64) -> Verdict {
    verdict_for(normalized_score, VerdictThresholds::default())
}

/// The eight emotion categories, in canonical (tie-breaking) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmotionLabel {
    Anger,
    Confusion,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Satisfaction,
    Surprise,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 8] = [
        EmotionLabel::Anger,
        EmotionLabel::Confusion,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Joy,
        EmotionLabel::Sadness,
        EmotionLabel::Satisfaction,
        EmotionLabel::Surprise,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionLabel::Anger => "Anger",
            EmotionLabel::Confusion => "Confusion",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Joy => "Joy",
            EmotionLabel::Sadness => "Sadness",
            EmotionLabel::Satisfaction => "Satisfaction",
            EmotionLabel::Surprise => "Surprise",
        }
    }
}

impl std::fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default prototype sentence for each emotion.
pub fn default_prototypes() -> Vec<(EmotionLabel, String)> {
    vec![
        (EmotionLabel::Anger, "this makes me angry.".into()),
        (EmotionLabel::Confusion, "this is confusing.".into()),
        (EmotionLabel::Disgust, "this is disgusting.".into()),
        (EmotionLabel::Fear, "this is frightening.".into()),
        (EmotionLabel::Joy, "this is delightful.".into()),
        (EmotionLabel::Sadness, "this is sad.".into()),
        (EmotionLabel::Satisfaction, "this is satisfying.".into()),
        (EmotionLabel::Surprise, "this is surprising.".into()),
    ]
}

/// Nearest emotion prototype and its cosine similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionAssessment {
    pub label: EmotionLabel,
    pub similarity: f64,
}

/// Pre-embedded prototype set, validated to cover every label exactly
/// once in canonical order.
pub struct EmotionClassifier {
    prototypes: Vec<(EmotionLabel, EmbeddingVector)>,
}

impl EmotionClassifier {
    pub fn new(
        embedder: &dyn TextEmbedder,
        prototypes: &[(EmotionLabel, String)],
    ) -> Result<Self> {
        for label in EmotionLabel::ALL {
            if !prototypes.iter().any(|(l, _)| *l == label) {
                return Err(Error::MissingPrototype(label));
            }
        }
        let mut embedded = Vec::with_capacity(EmotionLabel::ALL.len());
        for label in EmotionLabel::ALL {
            let text = &prototypes
                .iter()
                .find(|(l, _)| *l == label)
                .expect("checked above")
                .1;
            embedded.push((label, embedder.embed(text)?));
        }
        Ok(Self {
            prototypes: embedded,
        })
    }

    pub fn with_defaults(embedder: &dyn TextEmbedder) -> Result<Self> {
        Self::new(embedder, &default_prototypes())
    }

    /// Argmax of cosine similarity over the prototypes; ties go to the
    /// earlier label in canonical order (strict `>` while scanning).
    pub fn classify(&self, question: &EmbeddingVector) -> Result<EmotionAssessment> {
        let mut best: Option<EmotionAssessment> = None;
        for (label, proto) in &self.prototypes {
            let similarity = cosine(question, proto)?;
            if best.map_or(true, |b| similarity > b.similarity) {
                best = Some(EmotionAssessment {
                    label: *label,
                    similarity,
                });
            }
        }
        Ok(best.expect("prototype set is never empty"))
    }
}
