//! Text-to-unit-vector embedding with interchangeable backends.
//!
//! Two backends sit behind [`Embedder`]: a deterministic hash-based one
//! (FNV-1a seed feeding a SplitMix64 stream, then L2 normalization) that
//! is bit-exact across runs and machines, and a remote client speaking
//! the `POST /embed` wire protocol of an encoder sidecar. Results are
//! cached per normalized input so repeated questions never re-contact a
//! remote backend.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use std::time::Duration;

use parking_lot::Mutex;
use serde::Deserialize;

use crate::error::{Error, Result};

pub(crate) const SPLITMIX_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX_GAMMA);
    let mut z = *state;
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}

/// Maps a SplitMix64 output to [0, 1).
pub(crate) fn unit_interval(z: u64) -> f64 {
    z as f64 / TWO_POW_64
}

fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &byte in data {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Canonical text normalization applied before embedding and parsing:
/// trims the ends, collapses ASCII whitespace runs to a single space,
/// and lowercases ASCII letters. All other characters pass through
/// unchanged.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if matches!(c, '\t' | '\n' | '\u{b}' | '\u{c}' | '\r' | ' ') {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        out.push(c.to_ascii_lowercase());
    }
    out
}

/// A sentence embedding: finite components with unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Validates finiteness and unit norm (within 1e-6) before wrapping.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BackendUnavailable(
                "embedding contains non-finite values".into(),
            ));
        }
        let norm = l2_norm(&values);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::BackendUnavailable(format!(
                "embedding norm {norm} is not unit"
            )));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity, clamped to [-1, 1] to absorb rounding.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let mut dot = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
    }
    let cos = dot / (l2_norm(a.values()) * l2_norm(b.values()));
    Ok(cos.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Deterministic,
    Remote,
}

/// Configuration for constructing an [`Embedder`].
#[derive(Debug, Clone)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    /// Output dimension for the deterministic backend; the remote
    /// backend's dimension is taken from its first response instead.
    pub dim: usize,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
}

impl BackendDescriptor {
    pub fn deterministic(dim: usize) -> Self {
        Self {
            kind: BackendKind::Deterministic,
            dim,
            endpoint: None,
            model_name: None,
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            dim: DEFAULT_DIM,
            endpoint: Some(endpoint.into()),
            model_name: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidValue {
                key: "embedding.dim".into(),
                constraint: "must be at least 2".into(),
            });
        }
        if self.kind == BackendKind::Remote
            && self.endpoint.as_deref().map_or(true, str::is_empty)
        {
            return Err(Error::InvalidValue {
                key: "embedding.endpoint".into(),
                constraint: "required for the remote backend".into(),
            });
        }
        Ok(())
    }
}

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_CACHE_CAPACITY: usize = 10_000;

/// Cache behavior: unbounded for the deterministic backend, LRU for
/// remote backends, or disabled entirely (used to verify transparency).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachePolicy {
    Unbounded,
    Lru(usize),
    Disabled,
}

struct Cache {
    policy: CachePolicy,
    entries: Mutex<HashMap<String, (u64, EmbeddingVector)>>,
    tick: AtomicU64,
}

impl Cache {
    fn new(policy: CachePolicy) -> Self {
        Self {
            policy,
            entries: Mutex::new(HashMap::new()),
            tick: AtomicU64::new(0),
        }
    }

    fn get(&self, key: &str) -> Option<EmbeddingVector> {
        if self.policy == CachePolicy::Disabled {
            return None;
        }
        let mut entries = self.entries.lock();
        let entry = entries.get_mut(key)?;
        entry.0 = self.tick.fetch_add(1, Ordering::Relaxed);
        Some(entry.1.clone())
    }

    fn insert(&self, key: String, vector: EmbeddingVector) {
        let capacity = match self.policy {
            CachePolicy::Disabled => return,
            CachePolicy::Unbounded => usize::MAX,
            CachePolicy::Lru(capacity) => capacity.max(1),
        };
        let mut entries = self.entries.lock();
        if entries.len() >= capacity && !entries.contains_key(&key) {
            // Exact LRU via a scan; eviction cost is dwarfed by the
            // remote round trip that caused the miss.
            if let Some(oldest) = entries
                .iter()
                .min_by_key(|(_, (tick, _))| *tick)
                .map(|(k, _)| k.clone())
            {
                entries.remove(&oldest);
            }
        }
        let tick = self.tick.fetch_add(1, Ordering::Relaxed);
        entries.insert(key, (tick, vector));
    }
}

/// Anything that can turn text into an [`EmbeddingVector`]. Implemented
/// by [`Embedder`] and by test stubs.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

enum BackendImpl {
    Deterministic { dim: usize },
    Remote(RemoteClient),
}

/// Normalizing, caching front end over a concrete backend.
pub struct Embedder {
    backend: BackendImpl,
    cache: Cache,
}

impl Embedder {
    pub fn deterministic(dim: usize) -> Self {
        Self::with_cache(BackendDescriptor::deterministic(dim), CachePolicy::Unbounded)
            .expect("deterministic descriptor is always valid for dim >= 2")
    }

    pub fn remote(endpoint: impl Into<String>, cache_capacity: usize) -> Result<Self> {
        Self::with_cache(
            BackendDescriptor::remote(endpoint),
            CachePolicy::Lru(cache_capacity),
        )
    }

    pub fn with_cache(descriptor: BackendDescriptor, policy: CachePolicy) -> Result<Self> {
        descriptor.validate()?;
        let backend = match descriptor.kind {
            BackendKind::Deterministic => BackendImpl::Deterministic {
                dim: descriptor.dim,
            },
            BackendKind::Remote => BackendImpl::Remote(RemoteClient::new(
                descriptor.endpoint.expect("validated above"),
            )?),
        };
        Ok(Self {
            backend,
            cache: Cache::new(policy),
        })
    }

    /// Output dimension, when known. The remote backend reports `None`
    /// until its first successful response.
    pub fn dim(&self) -> Option<usize> {
        match &self.backend {
            BackendImpl::Deterministic { dim } => Some(*dim),
            BackendImpl::Remote(client) => client.dim.get().copied(),
        }
    }

    fn compute(&self, normalized: &[String]) -> Result<Vec<EmbeddingVector>> {
        match &self.backend {
            BackendImpl::Deterministic { dim } => normalized
                .iter()
                .map(|text| deterministic_embedding(text, *dim))
                .collect(),
            BackendImpl::Remote(client) => client.embed(normalized),
        }
    }
}

impl TextEmbedder for Embedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed_batch(&[text])?.pop().expect("one result per input"))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let keys: Vec<String> = texts.iter().map(|t| normalize_text(t)).collect();
        if keys.iter().any(String::is_empty) {
            return Err(Error::EmptyText);
        }

        let mut results: Vec<Option<EmbeddingVector>> =
            keys.iter().map(|k| self.cache.get(k)).collect();

        // Batch the misses, deduplicated, so one request covers them all.
        let mut missing: Vec<String> = Vec::new();
        for (key, slot) in keys.iter().zip(&results) {
            if slot.is_none() && !missing.contains(key) {
                missing.push(key.clone());
            }
        }
        if !missing.is_empty() {
            let computed = self.compute(&missing)?;
            let lookup: HashMap<&String, &EmbeddingVector> =
                missing.iter().zip(&computed).collect();
            for (key, slot) in keys.iter().zip(results.iter_mut()) {
                if slot.is_none() {
                    let vector = (*lookup[key]).clone();
                    self.cache.insert(key.clone(), vector.clone());
                    *slot = Some(vector);
                }
            }
        }

        Ok(results.into_iter().map(|v| v.expect("filled above")).collect())
    }
}

/// The reference deterministic procedure: FNV-1a over the normalized
/// UTF-8 bytes seeds a SplitMix64 stream whose outputs are mapped to
/// [-1, 1) and L2-normalized.
fn deterministic_embedding(normalized: &str, dim: usize) -> Result<EmbeddingVector> {
    let mut state = fnv1a64(normalized.as_bytes());
    let mut values = Vec::with_capacity(dim);
    for _ in 0..dim {
        let z = splitmix64(&mut state);
        values.push(2.0 * unit_interval(z) - 1.0);
    }
    let norm = l2_norm(&values);
    for v in &mut values {
        *v /= norm;
    }
    EmbeddingVector::from_values(values)
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

struct RemoteClient {
    endpoint: String,
    client: reqwest::blocking::Client,
    dim: OnceLock<usize>,
}

impl RemoteClient {
    fn new(endpoint: String) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .connect_timeout(Duration::from_secs(5))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            client,
            dim: OnceLock::new(),
        })
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let url = format!("{}/embed", self.endpoint);
        let body = serde_json::json!({ "texts": texts });
        let response = self
            .client
            .post(&url)
            .json(&body)
            .send()
            .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(Error::BackendUnavailable(format!(
                "{url} returned {}",
                response.status()
            )));
        }
        let payload: EmbedResponse = response
            .json()
            .map_err(|e| Error::BackendUnavailable(format!("malformed response: {e}")))?;

        let expected = *self.dim.get_or_init(|| payload.dim);
        if payload.dim != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: payload.dim,
            });
        }
        if payload.vectors.len() != texts.len() {
            return Err(Error::BackendUnavailable(format!(
                "expected {} vectors, got {}",
                texts.len(),
                payload.vectors.len()
            )));
        }
        payload
            .vectors
            .into_iter()
            .map(|mut row| {
                if row.len() != expected {
                    return Err(Error::DimensionMismatch {
                        expected,
                        got: row.len(),
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BackendUnavailable(
                        "embedding contains non-finite values".into(),
                    ));
                }
                // Servers normalize to within 1e-5; renormalize so the
                // vector invariant (1e-6) holds regardless of rounding.
                let norm = l2_norm(&row);
                if norm == 0.0 {
                    return Err(Error::BackendUnavailable("zero embedding".into()));
                }
                for v in &mut row {
                    *v /= norm;
                }
                EmbeddingVector::from_values(row)
            })
            .collect()
    }
}

/// Probes `GET {endpoint}/healthz`; any 2xx counts as healthy.
pub fn probe_health(endpoint: &str) -> Result<()> {
    let url = format!("{}/healthz", endpoint.trim_end_matches('/'));
    let client = reqwest::blocking::Client::builder()
        .connect_timeout(Duration::from_secs(5))
        .timeout(Duration::from_secs(10))
        .build()
        .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
    let response = client
        .get(&url)
        .send()
        .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
    if response.status().is_success() {
        Ok(())
    } else {
        Err(Error::BackendUnavailable(format!(
            "{url} returned {}",
            response.status()
        )))
    }
}
