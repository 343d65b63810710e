//! Binary Secret / NonSensitive classification of candidates.
//!
//! Classification is pluggable through the [`Classifier`] trait. Two
//! implementations ship: [`HeuristicClassifier`], a deterministic
//! feature-weighted reference scorer, and [`RemoteClassifier`], an HTTP
//! adapter for an externally hosted model. Both only produce a confidence;
//! the label is always derived from it with `confidence >= threshold`.

mod heuristic;
mod remote;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scan::{Candidate, ContextWindow};

pub use heuristic::{heuristic_score, HeuristicClassifier, HEURISTIC_ID};
pub use remote::{remote_classify, RemoteClassifier, RemoteItem, RemoteScore};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(2);
pub const DEFAULT_REMOTE_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Secret,
    NonSensitive,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Secret => "Secret",
            Label::NonSensitive => "NonSensitive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    pub confidence: f64,
    pub classifier_id: String,
    pub threshold_used: f64,
}

impl Classification {
    /// Labels `confidence` against `threshold`. Ties go to Secret.
    pub fn from_confidence(confidence: f64, threshold: f64, classifier_id: &str) -> Self {
        let confidence = confidence.clamp(0.0, 1.0);
        let label = if confidence >= threshold {
            Label::Secret
        } else {
            Label::NonSensitive
        };
        Classification {
            label,
            confidence,
            classifier_id: classifier_id.to_string(),
            threshold_used: threshold,
        }
    }

    pub fn is_secret(&self) -> bool {
        self.label == Label::Secret
    }
}

/// A candidate confirmed as a secret.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub candidate: Candidate,
    pub classification: Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Heuristic,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Full URL of the model server's scoring endpoint (remote only).
    pub endpoint: Option<String>,
    pub threshold: f64,
    pub timeout: Duration,
    /// Maximum in-flight requests to the model server (remote only).
    pub max_concurrent: usize,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec::heuristic()
    }
}

impl ClassifierSpec {
    pub fn heuristic() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Heuristic,
            endpoint: None,
            threshold: DEFAULT_THRESHOLD,
            timeout: DEFAULT_REMOTE_TIMEOUT,
            max_concurrent: DEFAULT_REMOTE_CONCURRENCY,
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Remote,
            endpoint: Some(endpoint.into()),
            ..ClassifierSpec::heuristic()
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ClassifierError::InvalidSpec(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if self.kind == ClassifierKind::Remote && self.endpoint.is_none() {
            return Err(ClassifierError::InvalidSpec(
                "remote classifier requires an endpoint".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("invalid classifier spec: {0}")]
    InvalidSpec(String),
    #[error("classifier timed out")]
    Timeout,
    #[error("classifier connection refused: {0}")]
    ConnectionRefused(String),
    #[error("classifier returned a malformed response: {0}")]
    MalformedResponse(String),
    #[error("classifier returned HTTP status {0}")]
    Status(u16),
    #[error("classifier transport error: {0}")]
    Transport(String),
}

impl ClassifierError {
    /// Short machine-readable failure mode.
    pub fn failure_mode(&self) -> &'static str {
        match self {
            ClassifierError::InvalidSpec(_) => "invalid-spec",
            ClassifierError::Timeout => "timeout",
            ClassifierError::ConnectionRefused(_) => "connection-refused",
            ClassifierError::MalformedResponse(_) => "malformed-response",
            ClassifierError::Status(_) => "http-status",
            ClassifierError::Transport(_) => "transport",
        }
    }
}

/// One classifier input: the candidate and its surrounding context, kept as
/// separate fields. How they are concatenated is up to the model.
#[derive(Debug, Clone, Copy)]
pub struct ClassifierInput<'a> {
    pub candidate: &'a str,
    pub context: &'a ContextWindow,
}

impl<'a> From<&'a Candidate> for ClassifierInput<'a> {
    fn from(c: &'a Candidate) -> Self {
        ClassifierInput {
            candidate: &c.text,
            context: &c.context,
        }
    }
}

pub trait Classifier: Send + Sync {
    fn id(&self) -> &str;

    /// Confidence in `[0, 1]` that each input is a real secret, in input
    /// order.
    fn score_batch(&self, items: &[ClassifierInput<'_>]) -> Result<Vec<f64>, ClassifierError>;

    fn classify_batch(
        &self,
        items: &[ClassifierInput<'_>],
        threshold: f64,
    ) -> Result<Vec<Classification>, ClassifierError> {
        let scores = self.score_batch(items)?;
        if scores.len() != items.len() {
            return Err(ClassifierError::MalformedResponse(format!(
                "expected {} scores, got {}",
                items.len(),
                scores.len()
            )));
        }
        Ok(scores
            .into_iter()
            .map(|s| Classification::from_confidence(s, threshold, self.id()))
            .collect())
    }
}

impl<C: Classifier + ?Sized> Classifier for std::sync::Arc<C> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn score_batch(&self, items: &[ClassifierInput<'_>]) -> Result<Vec<f64>, ClassifierError> {
        (**self).score_batch(items)
    }
}

pub fn build_classifier(spec: &ClassifierSpec) -> Result<Box<dyn Classifier>, ClassifierError> {
    spec.validate()?;
    Ok(match spec.kind {
        ClassifierKind::Heuristic => Box::new(HeuristicClassifier),
        ClassifierKind::Remote => Box::new(RemoteClassifier::new(spec)?),
    })
}

/// Classifies a single candidate under `spec`.
pub fn classify(candidate: &Candidate, spec: &ClassifierSpec) -> Result<Classification, ClassifierError> {
    let classifier = build_classifier(spec)?;
    let mut out = classifier.classify_batch(&[candidate.into()], spec.threshold)?;
    Ok(out.remove(0))
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{candidates} candidates but {classifications} classifications")]
pub struct LengthMismatch {
    pub candidates: usize,
    pub classifications: usize,
}

/// Keeps exactly the Secret-labeled candidates, in order.
pub fn filter_findings(
    candidates: Vec<Candidate>,
    classifications: Vec<Classification>,
) -> Result<Vec<Finding>, LengthMismatch> {
    if candidates.len() != classifications.len() {
        return Err(LengthMismatch {
            candidates: candidates.len(),
            classifications: classifications.len(),
        });
    }
    Ok(candidates
        .into_iter()
        .zip(classifications)
        .filter(|(_, c)| c.is_secret())
        .map(|(candidate, classification)| Finding {
            candidate,
            classification,
        })
        .collect())
}
