//! Configuration: a flat text file of dotted `key = value` lines.
//!
//! Every key has a default, unknown keys are rejected, and validation
//! errors name the offending key. `#` starts a comment; blank lines are
//! ignored. The full key set (see `to_file_string`) covers the
//! embedding backend, verdict thresholds, feedback solicitation,
//! adaptation, storage paths, the listen address, and the per-emotion
//! prototype sentences and prosody table.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use crate::adaptation::AdaptationParams;
use crate::dialog::{DialogSettings, Prosody, ProsodyTable};
use crate::embedding::{
    BackendDescriptor, BackendKind, CachePolicy, DEFAULT_CACHE_CAPACITY, DEFAULT_DIM,
};
use crate::error::{Error, Result};
use crate::moral::{default_prototypes, EmotionLabel, VerdictThresholds};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub dim: usize,
    pub cache_capacity: usize,
    pub neutral_band: f64,
    pub feedback_probability: f64,
    pub feedback_seed: u64,
    pub adaptation: AdaptationParams,
    pub storage_dir: PathBuf,
    pub bank_path: PathBuf,
    pub listen_addr: String,
    /// One prototype sentence per emotion, canonical order.
    pub prototypes: Vec<(EmotionLabel, String)>,
    pub prosody: ProsodyTable,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            backend: BackendKind::Deterministic,
            endpoint: None,
            dim: DEFAULT_DIM,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            neutral_band: 0.1,
            feedback_probability: 0.3,
            feedback_seed: 42,
            adaptation: AdaptationParams::default(),
            storage_dir: PathBuf::from("./data"),
            bank_path: PathBuf::from("./bank.txt"),
            listen_addr: "127.0.0.1:8080".to_string(),
            prototypes: default_prototypes(),
            prosody: ProsodyTable::default(),
        }
    }
}

fn invalid(key: &str, constraint: &str) -> Error {
    Error::InvalidValue {
        key: key.to_string(),
        constraint: constraint.to_string(),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| invalid(key, "must be a number"))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| invalid(key, "must be a non-negative integer"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| invalid(key, "must be a non-negative integer"))
}

fn emotion_key(name: &str) -> Option<EmotionLabel> {
    EmotionLabel::ALL
        .into_iter()
        .find(|l| l.as_str().to_ascii_lowercase() == name)
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::Io(e)
            }
        })?;
        Self::parse(&text)
    }

    /// Parses the file content, applies defaults for absent keys, and
    /// validates everything.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(line, "expected key = value"))?;
            config.apply(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "embedding.backend" => {
                self.backend = match value {
                    "deterministic" => BackendKind::Deterministic,
                    "remote" => BackendKind::Remote,
                    _ => {
                        return Err(invalid(key, "must be \"deterministic\" or \"remote\""));
                    }
                }
            }
            "embedding.endpoint" => {
                self.endpoint = (!value.is_empty()).then(|| value.to_string());
            }
            "embedding.dim" => self.dim = parse_usize(key, value)?,
            "embedding.cache_capacity" => self.cache_capacity = parse_usize(key, value)?,
            "thresholds.neutral_band" => self.neutral_band = parse_f64(key, value)?,
            "feedback.probability" => self.feedback_probability = parse_f64(key, value)?,
            "feedback.seed" => self.feedback_seed = parse_u64(key, value)?,
            "adaptation.tau" => self.adaptation.tau = parse_f64(key, value)?,
            "adaptation.targets.yes" => self.adaptation.targets.yes = parse_f64(key, value)?,
            "adaptation.targets.no" => self.adaptation.targets.no = parse_f64(key, value)?,
            "adaptation.targets.neutral" => {
                self.adaptation.targets.neutral = parse_f64(key, value)?;
            }
            "storage.dir" => self.storage_dir = PathBuf::from(value),
            "bank.path" => self.bank_path = PathBuf::from(value),
            "listen.addr" => self.listen_addr = value.to_string(),
            _ => {
                if let Some(rest) = key.strip_prefix("prototypes.") {
                    let label =
                        emotion_key(rest).ok_or_else(|| Error::UnknownKey(key.to_string()))?;
                    let slot = self
                        .prototypes
                        .iter_mut()
                        .find(|(l, _)| *l == label)
                        .expect("defaults cover every label");
                    slot.1 = value.to_string();
                } else if let Some(rest) = key.strip_prefix("prosody.") {
                    let (name, part) = rest
                        .split_once('.')
                        .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
                    let label =
                        emotion_key(name).ok_or_else(|| Error::UnknownKey(key.to_string()))?;
                    let mut entry = self.prosody.get(label);
                    match part {
                        "pitch" => entry.pitch = parse_f64(key, value)?,
                        "rate" => entry.rate = parse_f64(key, value)?,
                        _ => return Err(Error::UnknownKey(key.to_string())),
                    }
                    self.prosody.set(label, entry);
                } else {
                    return Err(Error::UnknownKey(key.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.descriptor().validate()?;
        if self.cache_capacity == 0 {
            return Err(invalid("embedding.cache_capacity", "must be at least 1"));
        }
        VerdictThresholds::new(self.neutral_band)?;
        self.adaptation.validate(self.neutral_band)?;
        self.dialog_settings().validate()?;
        if self.storage_dir.as_os_str().is_empty() {
            return Err(invalid("storage.dir", "must not be empty"));
        }
        if self.bank_path.as_os_str().is_empty() {
            return Err(invalid("bank.path", "must not be empty"));
        }
        self.listen_addr
            .parse::<SocketAddr>()
            .map_err(|_| invalid("listen.addr", "must be an address:port pair"))?;
        for (label, text) in &self.prototypes {
            if text.trim().is_empty() {
                return Err(invalid(
                    &format!("prototypes.{}", label.as_str().to_ascii_lowercase()),
                    "must not be empty",
                ));
            }
        }
        Ok(())
    }

    pub fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: self.backend,
            dim: self.dim,
            endpoint: self.endpoint.clone(),
            model_name: None,
        }
    }

    pub fn cache_policy(&self) -> CachePolicy {
        match self.backend {
            BackendKind::Deterministic => CachePolicy::Unbounded,
            BackendKind::Remote => CachePolicy::Lru(self.cache_capacity),
        }
    }

    pub fn dialog_settings(&self) -> DialogSettings {
        DialogSettings {
            thresholds: VerdictThresholds {
                neutral_band: self.neutral_band,
            },
            feedback_probability: self.feedback_probability,
            feedback_seed: self.feedback_seed,
            prosody: self.prosody.clone(),
            prototypes: self.prototypes.clone(),
        }
    }

    /// Canonical serialization: every key, grouped, in a fixed order.
    /// `parse(to_file_string(c)) == c` for any valid config.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let backend = match self.backend {
            BackendKind::Deterministic => "deterministic",
            BackendKind::Remote => "remote",
        };
        out.push_str(&format!("embedding.backend = {backend}\n"));
        out.push_str(&format!(
            "embedding.endpoint = {}\n",
            self.endpoint.as_deref().unwrap_or("")
        ));
        out.push_str(&format!("embedding.dim = {}\n", self.dim));
        out.push_str(&format!(
            "embedding.cache_capacity = {}\n",
            self.cache_capacity
        ));
        out.push_str(&format!(
            "thresholds.neutral_band = {}\n",
            self.neutral_band
        ));
        out.push_str(&format!(
            "feedback.probability = {}\n",
            self.feedback_probability
        ));
        out.push_str(&format!("feedback.seed = {}\n", self.feedback_seed));
        out.push_str(&format!("adaptation.tau = {}\n", self.adaptation.tau));
        out.push_str(&format!(
            "adaptation.targets.yes = {}\n",
            self.adaptation.targets.yes
        ));
        out.push_str(&format!(
            "adaptation.targets.no = {}\n",
            self.adaptation.targets.no
        ));
        out.push_str(&format!(
            "adaptation.targets.neutral = {}\n",
            self.adaptation.targets.neutral
        ));
        out.push_str(&format!("storage.dir = {}\n", self.storage_dir.display()));
        out.push_str(&format!("bank.path = {}\n", self.bank_path.display()));
        out.push_str(&format!("listen.addr = {}\n", self.listen_addr));
        for (label, text) in &self.prototypes {
            out.push_str(&format!(
                "prototypes.{} = {text}\n",
                label.as_str().to_ascii_lowercase()
            ));
        }
        for label in EmotionLabel::ALL {
            let Prosody { pitch, rate } = self.prosody.get(label);
            let name = label.as_str().to_ascii_lowercase();
            out.push_str(&format!("prosody.{name}.pitch = {pitch}\n"));
            out.push_str(&format!("prosody.{name}.rate = {rate}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_defaults() {
        let config = Config::parse("").unwrap();
        assert_eq!(config, Config::default());
        assert_eq!(config.dim, 64);
        assert_eq!(config.feedback_seed, 42);
        assert_eq!(config.listen_addr, "127.0.0.1:8080");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let config = Config::parse("# a comment\n\n  # another\nfeedback.seed = 7\n").unwrap();
        assert_eq!(config.feedback_seed, 7);
    }

    #[test]
    fn round_trip_preserves_everything() {
        let mut config = Config::default();
        config.backend = BackendKind::Remote;
        config.endpoint = Some("http://127.0.0.1:9090".into());
        config.neutral_band = 0.15;
        config.feedback_probability = 0.45;
        config.adaptation.tau = 0.9;
        config.prototypes[3].1 = "this is terrifying.".into();
        let mut fear = config.prosody.get(EmotionLabel::Fear);
        fear.rate = 1.25;
        config.prosody.set(EmotionLabel::Fear, fear);

        let text = config.to_file_string();
        let reloaded = Config::parse(&text).unwrap();
        assert_eq!(reloaded, config);

        // Defaults round-trip too.
        let defaults = Config::default();
        assert_eq!(Config::parse(&defaults.to_file_string()).unwrap(), defaults);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            "volume = 11",
            "embedding.backned = deterministic",
            "prototypes.zeal = woo",
            "prosody.anger.speed = 2",
        ] {
            assert!(
                matches!(Config::parse(bad), Err(Error::UnknownKey(_))),
                "expected unknown-key error for {bad:?}"
            );
        }
    }

    #[test]
    fn out_of_range_values_name_their_key() {
        match Config::parse("feedback.probability = 1.5") {
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "feedback.probability"),
            other => panic!("expected invalid-value error, got {other:?}"),
        }
        match Config::parse("adaptation.tau = 0") {
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "adaptation.tau"),
            other => panic!("expected invalid-value error, got {other:?}"),
        }
        match Config::parse("embedding.dim = 1") {
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "embedding.dim"),
            other => panic!("expected invalid-value error, got {other:?}"),
        }
        match Config::parse("embedding.backend = remote") {
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "embedding.endpoint"),
            other => panic!("expected invalid-value error, got {other:?}"),
        }
        match Config::parse("listen.addr = not-an-address") {
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "listen.addr"),
            other => panic!("expected invalid-value error, got {other:?}"),
        }
        match Config::parse("thresholds.neutral_band = 0.7") {
            // A Yes target of 0.6 can't clear a 0.7-wide band.
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "adaptation.targets.yes"),
            other => panic!("expected invalid-value error, got {other:?}"),
        }
        match Config::parse("prototypes.joy =") {
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "prototypes.joy"),
            other => panic!("expected invalid-value error, got {other:?}"),
        }
    }

    #[test]
    fn number_parse_failures_name_the_key() {
        match Config::parse("embedding.dim = sixty-four") {
            Err(Error::InvalidValue { key, constraint }) => {
                assert_eq!(key, "embedding.dim");
                assert!(constraint.contains("integer"));
            }
            other => panic!("expected invalid-value error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_a_distinct_error() {
        assert!(matches!(
            Config::load(Path::new("/nonexistent/app.conf")),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn remote_backend_requires_endpoint_and_gets_lru_cache() {
        let config =
            Config::parse("embedding.backend = remote\nembedding.endpoint = http://h:1\n")
                .unwrap();
        assert_eq!(config.cache_policy(), CachePolicy::Lru(config.cache_capacity));
        assert_eq!(
            Config::default().cache_policy(),
            CachePolicy::Unbounded
        );
    }

    #[test]
    fn settings_views_reflect_overrides() {
        let config = Config::parse(
            "thresholds.neutral_band = 0.2\nfeedback.probability = 0\nprosody.joy.pitch = 1.3\nprototypes.anger = fury.\n",
        )
        .unwrap();
        let settings = config.dialog_settings();
        assert_eq!(settings.thresholds.neutral_band, 0.2);
        assert_eq!(settings.feedback_probability, 0.0);
        assert_eq!(settings.prosody.get(EmotionLabel::Joy).pitch, 1.3);
        assert_eq!(
            settings.prototypes.iter().find(|(l, _)| *l == EmotionLabel::Anger).unwrap().1,
            "fury."
        );
        let descriptor = config.descriptor();
        assert_eq!(descriptor.dim, 64);
        assert!(descriptor.validate().is_ok());
    }
}
