//! The analysis pipeline and its wire types.
//!
//! [`Analyzer`] ties extraction, cached classification and filtering
//! together. It is synchronous; the HTTP layer in [`http`] runs it on the
//! blocking thread pool so slow classification never stalls request
//! handling.

pub mod http;

use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::cache::{CacheKey, CacheStats, ResultCache, DEFAULT_CACHE_CAPACITY};
use crate::catalog::{compile_catalog, load_catalog_file, CatalogError, CompiledMatcher, RuleCatalog};
use crate::classify::{
    build_classifier, Classification, Classifier, ClassifierError, ClassifierInput, ClassifierSpec,
    Label,
};
use crate::redact::mask;
use crate::scan::{dedupe_candidates, extract_candidates_with_limit, Candidate, ScanError, DEFAULT_MAX_DOCUMENT_BYTES};

pub const DEFAULT_PORT: u16 = 8000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub include_non_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRequest {
    pub document: String,
    #[serde(default)]
    pub options: AnalysisOptions,
}

impl AnalysisRequest {
    pub fn new(document: impl Into<String>) -> Self {
        AnalysisRequest {
            document: document.into(),
            options: AnalysisOptions::default(),
        }
    }
}

/// Label as sent on the wire. `Unverified` only appears in degraded mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FindingLabel {
    Secret,
    NonSensitive,
    Unverified,
}

impl From<Label> for FindingLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Secret => FindingLabel::Secret,
            Label::NonSensitive => FindingLabel::NonSensitive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingOut {
    pub span_start: usize,
    pub span_end: usize,
    pub rule_id: String,
    pub label: FindingLabel,
    /// `null` for unverified findings.
    pub confidence: Option<f64>,
    pub masked_text: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub extraction_ms: f64,
    pub classification_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheUsage {
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResponse {
    pub findings: Vec<FindingOut>,
    pub timing: Timing,
    pub cache: CacheUsage,
    pub catalog_version: String,
    pub classifier_id: String,
    /// True when the classifier was unavailable and findings are unverified
    /// regex candidates.
    #[serde(default)]
    pub degraded: bool,
    #[serde(default)]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    pub catalog_version: String,
    pub classifier_id: String,
    pub rule_count: usize,
    pub cache: CacheStats,
    pub uptime_ms: u64,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    TooLarge(ScanError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("failed to load catalog {path}: {source}")]
    Catalog {
        path: String,
        #[source]
        source: CatalogError,
    },
    #[error(transparent)]
    Compile(CatalogError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("failed to bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

/// Service configuration. Immutable once the service starts.
///
/// Log redaction has no switch: candidate text is only ever logged in
/// masked form.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// `None` uses the bundled seed catalog.
    pub catalog_path: Option<PathBuf>,
    pub classifier: ClassifierSpec,
    pub cache_capacity: usize,
    pub max_document_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::V4(SocketAddrV4::new(Ipv4Addr::LOCALHOST, DEFAULT_PORT)),
            catalog_path: None,
            classifier: ClassifierSpec::heuristic(),
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            max_document_bytes: DEFAULT_MAX_DOCUMENT_BYTES,
        }
    }
}

/// Outcome of running the pipeline over one document, before it is shaped
/// into a response.
#[derive(Debug)]
pub struct PipelineRun {
    pub candidates: Vec<Candidate>,
    /// One per candidate, or the classifier failure.
    pub classifications: Result<Vec<Classification>, ClassifierError>,
    pub cache: CacheUsage,
    /// Number of batch calls made to the classifier (0 or 1).
    pub classifier_calls: usize,
    pub extraction: Duration,
    pub classification: Duration,
}

pub struct Analyzer {
    catalog: RuleCatalog,
    matcher: CompiledMatcher,
    classifier: Arc<dyn Classifier>,
    cache: ResultCache,
    threshold: f64,
    max_document_bytes: usize,
    started: Instant,
}

impl std::fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analyzer")
            .field("catalog_version", &self.catalog.version())
            .field("classifier_id", &self.classifier.id())
            .field("threshold", &self.threshold)
            .finish()
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

impl Analyzer {
    pub fn new(
        catalog: RuleCatalog,
        classifier: Arc<dyn Classifier>,
        threshold: f64,
        cache_capacity: usize,
    ) -> Result<Self, CatalogError> {
        let matcher = compile_catalog(&catalog)?;
        Ok(Analyzer {
            catalog,
            matcher,
            classifier,
            cache: ResultCache::new(cache_capacity),
            threshold,
            max_document_bytes: DEFAULT_MAX_DOCUMENT_BYTES,
            started: Instant::now(),
        })
    }

    /// Seed catalog, heuristic classifier, default threshold and cache.
    pub fn with_defaults() -> Self {
        Analyzer::new(
            RuleCatalog::seed(),
            Arc::new(crate::classify::HeuristicClassifier),
            crate::classify::DEFAULT_THRESHOLD,
            DEFAULT_CACHE_CAPACITY,
        )
        .expect("seed catalog compiles")
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, StartupError> {
        let catalog = match &config.catalog_path {
            None => RuleCatalog::seed(),
            Some(path) => load_catalog_file(path).map_err(|source| StartupError::Catalog {
                path: path.display().to_string(),
                source,
            })?,
        };
        let classifier: Arc<dyn Classifier> = Arc::from(build_classifier(&config.classifier)?);
        let analyzer = Analyzer::new(
            catalog,
            classifier,
            config.classifier.threshold,
            config.cache_capacity,
        )
        .map_err(StartupError::Compile)?;
        Ok(analyzer.with_max_document_bytes(config.max_document_bytes))
    }

    pub fn with_max_document_bytes(mut self, max: usize) -> Self {
        self.max_document_bytes = max;
        self
    }

    pub fn catalog(&self) -> &RuleCatalog {
        &self.catalog
    }

    pub fn matcher(&self) -> &CompiledMatcher {
        &self.matcher
    }

    pub fn classifier_id(&self) -> &str {
        self.classifier.id()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn max_document_bytes(&self) -> usize {
        self.max_document_bytes
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    /// Deduplicated regex candidates for `document`.
    pub fn candidates(&self, document: &str) -> Result<Vec<Candidate>, ScanError> {
        extract_candidates_with_limit(document, &self.matcher, self.max_document_bytes)
            .map(dedupe_candidates)
    }

    /// Extraction followed by cached classification.
    pub fn run(&self, document: &str, threshold: Option<f64>) -> Result<PipelineRun, AnalyzeError> {
        let threshold = threshold.unwrap_or(self.threshold);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(AnalyzeError::InvalidRequest(format!(
                "threshold {threshold} outside [0, 1]"
            )));
        }

        let t0 = Instant::now();
        let candidates = self.candidates(document).map_err(AnalyzeError::TooLarge)?;
        let extraction = t0.elapsed();

        let t1 = Instant::now();
        let id = self.classifier.id();
        let keys: Vec<CacheKey> = candidates
            .iter()
            .map(|c| CacheKey::new(&c.text, &c.context, id, threshold))
            .collect();
        let mut slots: Vec<Option<Classification>> = keys.iter().map(|k| self.cache.get(k)).collect();
        let misses: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].is_none()).collect();
        let cache = CacheUsage {
            hits: (slots.len() - misses.len()) as u64,
            misses: misses.len() as u64,
        };

        let mut classifier_calls = 0;
        let classifications = if misses.is_empty() {
            Ok(slots.into_iter().flatten().collect())
        } else {
            classifier_calls = 1;
            let inputs: Vec<ClassifierInput<'_>> =
                misses.iter().map(|&i| (&candidates[i]).into()).collect();
            match self.classifier.classify_batch(&inputs, threshold) {
                Ok(fresh) => {
                    for (&i, c) in misses.iter().zip(fresh) {
                        self.cache.put(keys[i], c.clone());
                        slots[i] = Some(c);
                    }
                    Ok(slots.into_iter().flatten().collect())
                }
                Err(e) => Err(e),
            }
        };
        let classification = t1.elapsed();

        Ok(PipelineRun {
            candidates,
            classifications,
            cache,
            classifier_calls,
            extraction,
            classification,
        })
    }

    /// Runs the full pipeline and shapes the wire response.
    pub fn analyze(&self, request: &AnalysisRequest) -> Result<AnalysisResponse, AnalyzeError> {
        let t0 = Instant::now();
        let run = self.run(&request.document, request.options.threshold)?;
        let include_all = request.options.include_non_sensitive;

        let (findings, degraded, warning): (Vec<FindingOut>, bool, Option<String>) =
            match &run.classifications {
            Ok(labels) => {
                let findings = run
                    .candidates
                    .iter()
                    .zip(labels)
                    .filter(|(_, c)| include_all || c.is_secret())
                    .map(|(cand, c)| FindingOut {
                        span_start: cand.span.start,
                        span_end: cand.span.end,
                        rule_id: cand.rule_id.clone(),
                        label: c.label.into(),
                        confidence: Some(c.confidence),
                        masked_text: mask(&cand.text),
                    })
                    .collect();
                (findings, false, None)
            }
            Err(e) => {
                warn!(failure = e.failure_mode(), error = %e, "classifier unavailable, returning unverified candidates");
                let findings = run
                    .candidates
                    .iter()
                    .map(|cand| FindingOut {
                        span_start: cand.span.start,
                        span_end: cand.span.end,
                        rule_id: cand.rule_id.clone(),
                        label: FindingLabel::Unverified,
                        confidence: None,
                        masked_text: mask(&cand.text),
                    })
                    .collect();
                (findings, true, Some(format!("classifier unavailable ({}): {e}", e.failure_mode())))
            }
        };

        for f in &findings {
            debug!(rule_id = %f.rule_id, span_start = f.span_start, span_end = f.span_end, label = ?f.label, masked = %f.masked_text, "finding");
        }
        let timing = Timing {
            extraction_ms: ms(run.extraction),
            classification_ms: ms(run.classification),
            total_ms: ms(t0.elapsed()),
        };
        info!(
            bytes = request.document.len(),
            candidates = run.candidates.len(),
            findings = findings.len(),
            cache_hits = run.cache.hits,
            cache_misses = run.cache.misses,
            degraded,
            total_ms = timing.total_ms,
            "analyzed document"
        );

        Ok(AnalysisResponse {
            findings,
            timing,
            cache: run.cache,
            catalog_version: self.catalog.version().to_string(),
            classifier_id: self.classifier.id().to_string(),
            degraded,
            warning,
        })
    }

    pub fn health(&self) -> HealthStatus {
        HealthStatus {
            status: "ok".into(),
            catalog_version: self.catalog.version().to_string(),
            classifier_id: self.classifier.id().to_string(),
            rule_count: self.matcher.rule_count(),
            cache: self.cache.stats(),
            uptime_ms: self.started.elapsed().as_millis() as u64,
        }
    }
}
