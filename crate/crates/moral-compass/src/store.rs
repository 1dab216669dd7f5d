//! Append-only persistence: every answered question and every piece of
//! feedback goes to a log file, one JSON record per line.
//!
//! Two files live in the storage directory: `queries.log` and
//! `feedback.log`. The store assigns ids (1, 2, ... per file), appends
//! each record as a single write, and loads tolerantly — a malformed or
//! crash-truncated line is counted and skipped, never fatal. Feedback
//! embeddings are not persisted; they are recomputed from the canonical
//! question on load so the files stay valid across backend changes.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::adaptation::{FeedbackRecord, FeedbackSource};
use crate::embedding::TextEmbedder;
use crate::error::{Error, Result};
use crate::moral::{EmotionLabel, TemplateId, Verdict};

pub const QUERIES_FILE: &str = "queries.log";
pub const FEEDBACK_FILE: &str = "feedback.log";

/// Current instant truncated to millisecond precision, matching the
/// log files' timestamp resolution so round trips are lossless.
pub(crate) fn now_millis() -> DateTime<Utc> {
    DateTime::from_timestamp_millis(Utc::now().timestamp_millis())
        .expect("current time is representable")
}

/// ISO-8601 UTC with exactly millisecond precision, e.g.
/// `2026-08-18T09:30:01.250Z`.
mod ts_millis {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    const FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

    pub fn serialize<S: Serializer>(dt: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&dt.format(FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&text)
            .map(|dt| dt.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// One answered question, as written to `queries.log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLogRecord {
    /// Store-assigned, 0 until persisted.
    pub id: u64,
    #[serde(with = "ts_millis")]
    pub timestamp: DateTime<Utc>,
    pub session_id: String,
    pub utterance_raw: String,
    pub canonical_question: String,
    pub template_id: TemplateId,
    pub action: String,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub adjusted_score: f64,
    pub verdict: Verdict,
    pub emotion_label: EmotionLabel,
    pub feedback_requested: bool,
}

/// `feedback.log` row: a FeedbackRecord minus its embedding.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeedbackRow {
    id: u64,
    #[serde(with = "ts_millis")]
    timestamp: DateTime<Utc>,
    question_canonical: String,
    base_normalized: f64,
    agrees: bool,
    alternative_verdict: Option<Verdict>,
    target_score: Option<f64>,
    source: FeedbackSource,
}

impl FeedbackRow {
    fn from_record(record: &FeedbackRecord, id: u64) -> Self {
        Self {
            id,
            timestamp: record.timestamp,
            question_canonical: record.question_canonical.clone(),
            base_normalized: record.base_normalized,
            agrees: record.agrees,
            alternative_verdict: record.alternative_verdict,
            target_score: record.target_score,
            source: record.source,
        }
    }
}

/// Aggregates over both logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub total_queries: u64,
    pub total_feedback: u64,
    /// Fraction of feedback that agreed; absent until any feedback exists.
    pub agreement_rate: Option<f64>,
    pub verdict_histogram: VerdictCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    #[serde(rename = "Yes")]
    pub yes: u64,
    #[serde(rename = "No")]
    pub no: u64,
    #[serde(rename = "Neutral")]
    pub neutral: u64,
}

impl VerdictCounts {
    pub fn bump(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Yes => self.yes += 1,
            Verdict::No => self.no += 1,
            Verdict::Neutral => self.neutral += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.yes + self.no + self.neutral
    }
}

/// Result of a tolerant load: what parsed, and how many lines did not.
#[derive(Debug)]
pub struct LoadOutcome<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

struct LogFile {
    file: File,
    next_id: u64,
}

impl LogFile {
    fn open(path: &Path) -> Result<Self> {
        let mut max_id = 0u64;
        if let Ok(bytes) = fs::read(path) {
            for line in bytes.split(|b| *b == b'\n') {
                if line.is_empty() {
                    continue;
                }
                if let Ok(value) = serde_json::from_slice::<serde_json::Value>(line) {
                    if let Some(id) = value.get("id").and_then(serde_json::Value::as_u64) {
                        max_id = max_id.max(id);
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            file,
            next_id: max_id + 1,
        })
    }

    /// Appends one record as a single write so a crash can only lose or
    /// truncate the final line, never interleave two.
    fn append(&mut self, json: &str) -> Result<()> {
        let mut buf = Vec::with_capacity(json.len() + 1);
        buf.extend_from_slice(json.as_bytes());
        buf.push(b'\n');
        self.file.write_all(&buf)?;
        Ok(())
    }
}

pub struct Store {
    dir: PathBuf,
    queries: Mutex<LogFile>,
    feedback: Mutex<LogFile>,
}

impl Store {
    /// Opens (creating if needed) the two log files under `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let queries = LogFile::open(&dir.join(QUERIES_FILE))?;
        let feedback = LogFile::open(&dir.join(FEEDBACK_FILE))?;
        Ok(Self {
            dir,
            queries: Mutex::new(queries),
            feedback: Mutex::new(feedback),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn queries_path(&self) -> PathBuf {
        self.dir.join(QUERIES_FILE)
    }

    pub fn feedback_path(&self) -> PathBuf {
        self.dir.join(FEEDBACK_FILE)
    }

    /// Appends a query record (its `id` field is replaced by the next
    /// id for the file) and returns the assigned id.
    pub fn append_query(&self, record: &QueryLogRecord) -> Result<u64> {
        let mut log = self.queries.lock();
        let id = log.next_id;
        let mut row = record.clone();
        row.id = id;
        log.append(&serde_json::to_string(&row)?)?;
        log.next_id += 1;
        Ok(id)
    }

    /// Appends a feedback record (embedding omitted, id assigned) and
    /// returns the assigned id.
    pub fn append_feedback(&self, record: &FeedbackRecord) -> Result<u64> {
        let mut log = self.feedback.lock();
        let id = log.next_id;
        let row = FeedbackRow::from_record(record, id);
        log.append(&serde_json::to_string(&row)?)?;
        log.next_id += 1;
        Ok(id)
    }

    fn read_lines(&self, path: &Path) -> Result<Vec<Vec<u8>>> {
        match fs::read(path) {
            Ok(bytes) => Ok(bytes
                .split(|b| *b == b'\n')
                .filter(|line| !line.is_empty())
                .map(<[u8]>::to_vec)
                .collect()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// All parseable query records, in file order.
    pub fn load_queries(&self) -> Result<LoadOutcome<QueryLogRecord>> {
        let mut records = Vec::new();
        let mut skipped = 0;
        for line in self.read_lines(&self.queries_path())? {
            match serde_json::from_slice::<QueryLogRecord>(&line) {
                Ok(record) => records.push(record),
                Err(_) => skipped += 1,
            }
        }
        Ok(LoadOutcome { records, skipped })
    }

    /// All parseable feedback records, embeddings recomputed from the
    /// canonical question via `embedder`. Rows that cannot produce an
    /// embedding (e.g. an empty question) count as skipped; a backend
    /// failure aborts the load instead, since retrying can fix it.
    pub fn load_feedback_all(
        &self,
        embedder: &dyn TextEmbedder,
    ) -> Result<LoadOutcome<FeedbackRecord>> {
        let mut records = Vec::new();
        let mut skipped = 0;
        for line in self.read_lines(&self.feedback_path())? {
            let row = match serde_json::from_slice::<FeedbackRow>(&line) {
                Ok(row) => row,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            let embedding = match embedder.embed(&row.question_canonical) {
                Ok(v) => v,
                Err(Error::EmptyText) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            records.push(FeedbackRecord {
                id: row.id,
                timestamp: row.timestamp,
                question_canonical: row.question_canonical,
                question_embedding: embedding,
                base_normalized: row.base_normalized,
                agrees: row.agrees,
                alternative_verdict: row.alternative_verdict,
                target_score: row.target_score,
                source: row.source,
            });
        }
        Ok(LoadOutcome { records, skipped })
    }

    /// Counts over both logs. Malformed lines are ignored, matching the
    /// tolerant loaders.
    pub fn stats(&self) -> Result<Stats> {
        let queries = self.load_queries()?;
        let mut histogram = VerdictCounts::default();
        for record in &queries.records {
            histogram.bump(record.verdict);
        }

        let mut total_feedback = 0u64;
        let mut agreed = 0u64;
        for line in self.read_lines(&self.feedback_path())? {
            if let Ok(row) = serde_json::from_slice::<FeedbackRow>(&line) {
                total_feedback += 1;
                if row.agrees {
                    agreed += 1;
                }
            }
        }

        Ok(Stats {
            total_queries: queries.records.len() as u64,
            total_feedback,
            agreement_rate: (total_feedback > 0).then(|| agreed as f64 / total_feedback as f64),
            verdict_histogram: histogram,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{correction, AdaptationParams};
    use crate::embedding::{splitmix64, Embedder};

    fn sample_query(session: &str, verdict: Verdict) -> QueryLogRecord {
        QueryLogRecord {
            id: 0,
            timestamp: now_millis(),
            session_id: session.into(),
            utterance_raw: "Should I kill   time?".into(),
            canonical_question: "should i kill time?".into(),
            template_id: TemplateId::ShouldI,
            action: "kill time".into(),
            raw_score: -0.433_159_814_718_948_93,
            normalized_score: -0.216_579_907_359_474_47,
            adjusted_score: -0.216_579_907_359_474_47,
            verdict,
            emotion_label: EmotionLabel::Fear,
            feedback_requested: false,
        }
    }

    fn sample_feedback(embedder: &Embedder, question: &str, agrees: bool) -> FeedbackRecord {
        let params = AdaptationParams::default();
        FeedbackRecord::new(
            question,
            embedder.embed(question).unwrap(),
            0.2,
            agrees,
            (!agrees).then_some(Verdict::No),
            FeedbackSource::Live,
            &params,
        )
        .unwrap()
    }

    #[test]
    fn query_round_trip_is_field_exact() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut record = sample_query("s-1", Verdict::No);
        record.raw_score = 0.1 + 0.2; // a value with messy low bits
        let id = store.append_query(&record).unwrap();
        assert_eq!(id, 1);

        let loaded = store.load_queries().unwrap();
        assert_eq!(loaded.skipped, 0);
        record.id = id;
        assert_eq!(loaded.records, vec![record]);
        assert_eq!(loaded.records[0].raw_score.to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn ids_are_monotonic_and_gapless() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let record = sample_query("s-1", Verdict::Neutral);
        for expected in 1..=1000u64 {
            assert_eq!(store.append_query(&record).unwrap(), expected);
        }
        let loaded = store.load_queries().unwrap();
        assert_eq!(loaded.records.len(), 1000);
        let ids: Vec<u64> = loaded.records.iter().map(|r| r.id).collect();
        assert_eq!(ids, (1..=1000).collect::<Vec<u64>>());
    }

    #[test]
    fn ids_continue_after_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.append_query(&sample_query("s-1", Verdict::Yes)).unwrap();
            store.append_query(&sample_query("s-1", Verdict::Yes)).unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.append_query(&sample_query("s-2", Verdict::No)).unwrap(), 3);
    }

    #[test]
    fn truncated_final_line_is_skipped_with_warning_count() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.append_query(&sample_query("s-1", Verdict::Yes)).unwrap();
            store.append_query(&sample_query("s-1", Verdict::No)).unwrap();
        }
        // Chop the file mid-way through the final record, as a crash would.
        let path = dir.path().join(QUERIES_FILE);
        let contents = fs::read(&path).unwrap();
        fs::write(&path, &contents[..contents.len() - 25]).unwrap();

        let store = Store::open(dir.path()).unwrap();
        let loaded = store.load_queries().unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.skipped, 1);
        // The damaged line does not disturb id assignment for new rows.
        assert_eq!(store.append_query(&sample_query("s-1", Verdict::No)).unwrap(), 2);
    }

    #[test]
    fn garbage_lines_are_tolerated_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.append_query(&sample_query("s-1", Verdict::Yes)).unwrap();
        drop(store);

        let path = dir.path().join(QUERIES_FILE);
        let mut contents = fs::read(&path).unwrap();
        contents.extend_from_slice(b"not json at all\n{\"id\":99}\n");
        fs::write(&path, contents).unwrap();

        let store = Store::open(dir.path()).unwrap();
        let loaded = store.load_queries().unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.skipped, 2);
        let stats = store.stats().unwrap();
        assert_eq!(stats.total_queries, 1);
    }

    #[test]
    fn feedback_reload_preserves_corrections() {
        let dir = tempfile::tempdir().unwrap();
        let embedder = Embedder::deterministic(64);
        let params = AdaptationParams::default();
        let store = Store::open(dir.path()).unwrap();

        // 50 pseudo-random records across both templates and all verdicts.
        let mut originals = Vec::new();
        let mut state = 11u64;
        for i in 0..50 {
            let question = format!("should i do thing number {i}?");
            let agrees = splitmix64(&mut state) % 3 == 0;
            let alternative = if agrees {
                None
            } else {
                Some(match splitmix64(&mut state) % 3 {
                    0 => Verdict::Yes,
                    1 => Verdict::No,
                    _ => Verdict::Neutral,
                })
            };
            let record = FeedbackRecord::new(
                &question,
                embedder.embed(&question).unwrap(),
                (splitmix64(&mut state) % 100) as f64 / 100.0 - 0.5,
                agrees,
                alternative,
                FeedbackSource::Training,
                &params,
            )
            .unwrap();
            store.append_feedback(&record).unwrap();
            originals.push(record);
        }

        let reloaded = store.load_feedback_all(&embedder).unwrap();
        assert_eq!(reloaded.skipped, 0);
        assert_eq!(reloaded.records.len(), 50);

        for probe in ["should i do thing number 7?", "should i do thing number 49?", "is it okay to nap?"] {
            let e_q = embedder.embed(probe).unwrap();
            let before = correction(&e_q, 0.1, &originals, &params).unwrap();
            let after = correction(&e_q, 0.1, &reloaded.records, &params).unwrap();
            assert_eq!(before.to_bits(), after.to_bits(), "probe {probe}");
        }
    }

    #[test]
    fn feedback_round_trip_is_field_exact() {
        let dir = tempfile::tempdir().unwrap();
        let embedder = Embedder::deterministic(64);
        let store = Store::open(dir.path()).unwrap();
        let mut record = sample_feedback(&embedder, "should i nap?", false);
        record.id = store.append_feedback(&record).unwrap();

        let loaded = store.load_feedback_all(&embedder).unwrap();
        assert_eq!(loaded.records, vec![record]);
    }

    #[test]
    fn empty_logs_give_zero_stats() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let stats = store.stats().unwrap();
        assert_eq!(stats.total_queries, 0);
        assert_eq!(stats.total_feedback, 0);
        assert_eq!(stats.agreement_rate, None);
        assert_eq!(stats.verdict_histogram.total(), 0);
        assert!(store.load_feedback_all(&Embedder::deterministic(8)).unwrap().records.is_empty());
    }

    #[test]
    fn agreement_rate_is_fraction_of_agrees() {
        let dir = tempfile::tempdir().unwrap();
        let embedder = Embedder::deterministic(32);
        let store = Store::open(dir.path()).unwrap();
        for agrees in [true, true, true, false] {
            store
                .append_feedback(&sample_feedback(&embedder, "should i nap?", agrees))
                .unwrap();
        }
        let stats = store.stats().unwrap();
        assert_eq!(stats.total_feedback, 4);
        assert_eq!(stats.agreement_rate, Some(0.75));
    }

    #[test]
    fn stats_match_independent_recount() {
        let dir = tempfile::tempdir().unwrap();
        let embedder = Embedder::deterministic(32);
        let store = Store::open(dir.path()).unwrap();
        let mut state = 99u64;
        for i in 0..200 {
            let verdict = match splitmix64(&mut state) % 3 {
                0 => Verdict::Yes,
                1 => Verdict::No,
                _ => Verdict::Neutral,
            };
            store.append_query(&sample_query(&format!("s-{}", i % 7), verdict)).unwrap();
            if splitmix64(&mut state) % 2 == 0 {
                let agrees = splitmix64(&mut state) % 4 != 0;
                store
                    .append_feedback(&sample_feedback(&embedder, "should i nap?", agrees))
                    .unwrap();
            }
        }

        // Brute-force recount straight off the files.
        let mut yes = 0u64;
        let mut no = 0u64;
        let mut neutral = 0u64;
        for line in String::from_utf8(fs::read(store.queries_path()).unwrap()).unwrap().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            match v["verdict"].as_str().unwrap() {
                "Yes" => yes += 1,
                "No" => no += 1,
                "Neutral" => neutral += 1,
                other => panic!("unexpected verdict {other}"),
            }
        }
        let mut fb_total = 0u64;
        let mut fb_agreed = 0u64;
        for line in String::from_utf8(fs::read(store.feedback_path()).unwrap()).unwrap().lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            fb_total += 1;
            if v["agrees"].as_bool().unwrap() {
                fb_agreed += 1;
            }
        }

        let stats = store.stats().unwrap();
        assert_eq!(stats.total_queries, yes + no + neutral);
        assert_eq!(stats.verdict_histogram, VerdictCounts { yes, no, neutral });
        assert_eq!(stats.total_feedback, fb_total);
        assert_eq!(stats.agreement_rate, Some(fb_agreed as f64 / fb_total as f64));
        assert_eq!(stats.verdict_histogram.total(), stats.total_queries);
    }

    #[test]
    fn timestamps_round_trip_at_millisecond_precision() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut record = sample_query("s-1", Verdict::Yes);
        record.timestamp = DateTime::from_timestamp_millis(1_766_000_000_123).unwrap();
        store.append_query(&record).unwrap();

        let line = String::from_utf8(fs::read(store.queries_path()).unwrap()).unwrap();
        assert!(line.contains("\"timestamp\":\"2025-12-17T19:33:20.123Z\""), "line: {line}");
        let loaded = store.load_queries().unwrap();
        assert_eq!(loaded.records[0].timestamp, record.timestamp);
    }
}
