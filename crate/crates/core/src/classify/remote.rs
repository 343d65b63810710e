//! HTTP adapter for an externally hosted classification model.
//!
//! Wire contract (`Content-Type: application/json`, UTF-8):
//!
//! ```text
//! POST <endpoint>
//! [{"candidate": "...", "context_before": "...", "context_after": "..."}, ...]
//!
//! 200 OK
//! [{"confidence": 0.93}, ...]
//! ```
//!
//! One request per batch; the response must hold exactly one entry per
//! input, in input order, with confidences in `[0, 1]`.

use std::io;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Classification, Classifier, ClassifierError, ClassifierInput, ClassifierSpec};
use crate::scan::ContextWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteItem {
    pub candidate: String,
    pub context_before: String,
    pub context_after: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemoteScore {
    pub confidence: f64,
}

// counting semaphore capping in-flight requests
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Permits {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteClassifier {
    id: String,
    endpoint: String,
    agent: ureq::Agent,
    permits: Permits,
}

impl std::fmt::Debug for RemoteClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClassifier")
            .field("endpoint", &self.endpoint)
            .finish()
    }
}

impl RemoteClassifier {
    pub fn new(spec: &ClassifierSpec) -> Result<Self, ClassifierError> {
        let endpoint = spec
            .endpoint
            .clone()
            .ok_or_else(|| ClassifierError::InvalidSpec("remote classifier requires an endpoint".into()))?;
        Ok(RemoteClassifier {
            id: format!("remote:{endpoint}"),
            agent: agent(spec.timeout),
            permits: Permits::new(spec.max_concurrent),
            endpoint,
        })
    }

    fn post(&self, body: &[RemoteItem]) -> Result<Vec<RemoteScore>, ClassifierError> {
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json")
            .send(serde_json::to_vec(body).expect("items serialize"))
            .map_err(map_error)?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(ClassifierError::Status(status));
        }
        let bytes = resp
            .body_mut()
            .read_to_vec()
            .map_err(map_error)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| ClassifierError::MalformedResponse(e.to_string()))
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn map_io(e: &io::Error) -> ClassifierError {
    match e.kind() {
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => ClassifierError::Timeout,
        io::ErrorKind::ConnectionRefused => ClassifierError::ConnectionRefused(e.to_string()),
        _ => ClassifierError::Transport(e.to_string()),
    }
}

fn map_error(e: ureq::Error) -> ClassifierError {
    match e {
        ureq::Error::Timeout(_) => ClassifierError::Timeout,
        ureq::Error::Io(ref io) => map_io(io),
        ureq::Error::ConnectionFailed => ClassifierError::ConnectionRefused("connection failed".into()),
        ureq::Error::StatusCode(code) => ClassifierError::Status(code),
        ureq::Error::Json(j) => ClassifierError::MalformedResponse(j.to_string()),
        other => ClassifierError::Transport(other.to_string()),
    }
}

fn to_item(input: &ClassifierInput<'_>) -> RemoteItem {
    RemoteItem {
        candidate: input.candidate.to_string(),
        context_before: input.context.before.clone(),
        context_after: input.context.after.clone(),
    }
}

impl Classifier for RemoteClassifier {
    fn id(&self) -> &str {
        &self.id
    }

    fn score_batch(&self, items: &[ClassifierInput<'_>]) -> Result<Vec<f64>, ClassifierError> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let body: Vec<RemoteItem> = items.iter().map(to_item).collect();
        let scores = self.post(&body)?;
        if scores.len() != items.len() {
            return Err(ClassifierError::MalformedResponse(format!(
                "expected {} scores, got {}",
                items.len(),
                scores.len()
            )));
        }
        scores
            .into_iter()
            .map(|s| {
                if s.confidence.is_finite() && (0.0..=1.0).contains(&s.confidence) {
                    Ok(s.confidence)
                } else {
                    Err(ClassifierError::MalformedResponse(format!(
                        "confidence {} outside [0, 1]",
                        s.confidence
                    )))
                }
            })
            .collect()
    }
}

/// Classifies a batch of `(candidate, context)` pairs with one round trip to
/// the model server named in `spec`.
pub fn remote_classify(
    batch: &[(&str, &ContextWindow)],
    spec: &ClassifierSpec,
) -> Result<Vec<Classification>, ClassifierError> {
    if spec.kind != super::ClassifierKind::Remote {
        return Err(ClassifierError::InvalidSpec("spec is not a remote classifier".into()));
    }
    spec.validate()?;
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let classifier = RemoteClassifier::new(spec)?;
    let inputs: Vec<ClassifierInput<'_>> = batch
        .iter()
        .map(|(candidate, context)| ClassifierInput { candidate, context })
        .collect();
    classifier.classify_batch(&inputs, spec.threshold)
}
