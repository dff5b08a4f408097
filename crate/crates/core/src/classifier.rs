//! Per-class error scoring of (original, candidate) pairs.
//!
//! [`RuleBasedClassifier`] is a transparent, deterministic reference scorer;
//! [`RemoteClassifier`] forwards to a scoring service speaking the same JSON
//! contract.

use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{char_len, clause_marker_count, content_words};
use crate::types::{ErrorClass, ErrorProbabilities, ErrorRegistry};

/// Clause count at which the complexity score saturates.
pub const CLAUSE_SATURATION: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("classifier unavailable: {0}")]
    Unavailable(String),
    #[error("classifier returned an invalid score vector: {0}")]
    InvalidScores(String),
}

pub trait ErrorClassifier: Send + Sync {
    fn id(&self) -> &str;

    fn registry(&self) -> &ErrorRegistry;

    fn classify(
        &self,
        original: &str,
        candidate: &str,
    ) -> Result<ErrorProbabilities, ClassifierError>;
}

/// Fraction of the original's content words that survive in the candidate.
/// An original with no content words has nothing to lose and scores 1.
pub fn content_word_recall(original: &str, candidate: &str) -> f64 {
    let orig = content_words(original);
    if orig.is_empty() {
        return 1.0;
    }
    let cand = content_words(candidate);
    orig.iter().filter(|w| cand.contains(*w)).count() as f64 / orig.len() as f64
}

pub fn meaning_altered_score(original: &str, candidate: &str) -> f64 {
    (1.0 - content_word_recall(original, candidate)).clamp(0.0, 1.0)
}

pub fn syntactic_complexity_score(candidate: &str) -> f64 {
    (clause_marker_count(candidate) as f64 / CLAUSE_SATURATION).min(1.0)
}

pub fn too_long_score(original: &str, candidate: &str) -> f64 {
    if char_len(candidate) > char_len(original) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct RuleBasedClassifier {
    registry: ErrorRegistry,
}

impl RuleBasedClassifier {
    pub const ID: &'static str = "rule-based-v1";

    pub fn new(registry: ErrorRegistry) -> Self {
        Self { registry }
    }

    pub fn score(original: &str, candidate: &str, class: ErrorClass) -> f64 {
        match class {
            ErrorClass::MeaningAltered => meaning_altered_score(original, candidate),
            ErrorClass::SyntacticallyComplex => syntactic_complexity_score(candidate),
            ErrorClass::TooLong => too_long_score(original, candidate),
        }
    }
}

impl Default for RuleBasedClassifier {
    fn default() -> Self {
        Self::new(ErrorRegistry::default())
    }
}

impl ErrorClassifier for RuleBasedClassifier {
    fn id(&self) -> &str {
        Self::ID
    }

    fn registry(&self) -> &ErrorRegistry {
        &self.registry
    }

    fn classify(
        &self,
        original: &str,
        candidate: &str,
    ) -> Result<ErrorProbabilities, ClassifierError> {
        Ok(ErrorProbabilities {
            probs: self
                .registry
                .classes()
                .iter()
                .map(|c| Self::score(original, candidate, *c))
                .collect(),
            classifier_id: Self::ID.to_string(),
        })
    }
}

/// Request body of the remote scoring protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub original: String,
    pub candidate: String,
}

/// Posts `{original, candidate}` and expects `{probs, classifier_id}`.
pub struct RemoteClassifier {
    endpoint: String,
    registry: ErrorRegistry,
    timeout: Duration,
    client: OnceLock<reqwest::blocking::Client>,
}

impl RemoteClassifier {
    pub fn new(endpoint: impl Into<String>, registry: ErrorRegistry, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            registry,
            timeout,
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, ClassifierError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ClassifierError::Unavailable(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }
}

impl ErrorClassifier for RemoteClassifier {
    fn id(&self) -> &str {
        &self.endpoint
    }

    fn registry(&self) -> &ErrorRegistry {
        &self.registry
    }

    fn classify(
        &self,
        original: &str,
        candidate: &str,
    ) -> Result<ErrorProbabilities, ClassifierError> {
        let resp = self
            .client()?
            .post(&self.endpoint)
            .json(&ClassifyRequest {
                original: original.to_string(),
                candidate: candidate.to_string(),
            })
            .send()
            .map_err(|e| ClassifierError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ClassifierError::Unavailable(format!(
                "HTTP {}",
                resp.status()
            )));
        }
        let probs: ErrorProbabilities = resp
            .json()
            .map_err(|e| ClassifierError::InvalidScores(e.to_string()))?;
        if !probs.is_valid_for(&self.registry) {
            return Err(ClassifierError::InvalidScores(format!(
                "expected {} values in [0,1], got {:?}",
                self.registry.len(),
                probs.probs
            )));
        }
        Ok(probs)
    }
}
