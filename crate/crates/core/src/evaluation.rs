//! Labeled-corpus evaluation and latency measurement.
//!
//! Matching is span-level and exact: a finding counts for an annotation only
//! when both byte spans are identical. Spans flagged by several rules count
//! once.
//!
//! Zero-denominator conventions: precision is 1.0 when nothing was predicted
//! and recall is 1.0 when nothing was there to find. F1 is 0.0 when
//! precision and recall are both 0.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassifierError, Label};
use crate::scan::Span;
use crate::service::{AnalysisRequest, AnalysisResponse, AnalyzeError, Analyzer};

/// The frozen desk corpus bundled with the crate.
pub const DESK_CORPUS_JSON: &str = include_str!("../data/desk_corpus.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub label: Label,
    /// Free-form category, e.g. `secret`, `placeholder`, `redacted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

impl Annotation {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    pub text: String,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub documents: Vec<LabeledDocument>,
}

impl LabeledCorpus {
    pub fn from_json(json: &str) -> Result<Self, EvalError> {
        let corpus: LabeledCorpus =
            serde_json::from_str(json).map_err(|e| EvalError::Corpus(e.to_string()))?;
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Corpus(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn desk() -> Self {
        Self::from_json(DESK_CORPUS_JSON).expect("bundled desk corpus is valid")
    }

    /// Every annotation span must lie on character boundaries inside its
    /// document, and spans must be unique per document.
    pub fn validate(&self) -> Result<(), EvalError> {
        for doc in &self.documents {
            let mut seen = BTreeSet::new();
            for a in &doc.annotations {
                let ok = a.start < a.end
                    && a.end <= doc.text.len()
                    && doc.text.is_char_boundary(a.start)
                    && doc.text.is_char_boundary(a.end);
                if !ok {
                    return Err(EvalError::InvalidSpan {
                        document: doc.id.clone(),
                        span: a.span(),
                    });
                }
                if !seen.insert(a.span()) {
                    return Err(EvalError::Corpus(format!(
                        "document {}: duplicate annotation {}",
                        doc.id,
                        a.span()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// Metrics from a precision/recall pair, with F1 as their harmonic mean.
    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        Metrics {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P {:6.2}%  R {:6.2}%  F1 {:6.2}%",
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0
        )
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid span {span} in document {document}")]
    InvalidSpan { document: String, span: Span },
    #[error("macro average over zero classes")]
    EmptyMacro,
    #[error("malformed corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error("classifier failed during evaluation: {0}")]
    Classifier(#[from] ClassifierError),
    #[error("service at {target} unreachable: {message}")]
    Unreachable { target: String, message: String },
}

fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_spans<'a>(spans: impl IntoIterator<Item = &'a Span>) -> Result<(), EvalError> {
    for s in spans {
        if s.start >= s.end {
            return Err(EvalError::InvalidSpan {
                document: String::new(),
                span: *s,
            });
        }
    }
    Ok(())
}

/// Span-level confusion counts for the Secret class.
///
/// `tp`: finding spans equal to a Secret annotation. `fp`: finding spans
/// matching no Secret annotation. `fn`: Secret annotations with no finding.
/// `tn`: NonSensitive annotations with no finding.
pub fn match_predictions(findings: &[Span], annotations: &[Annotation]) -> Result<ConfusionCounts, EvalError> {
    Ok(class_counts(findings, annotations)?.secret)
}

/// Confusion counts for both classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub secret: ConfusionCounts,
    pub non_sensitive: ConfusionCounts,
}

impl std::ops::AddAssign for ClassCounts {
    fn add_assign(&mut self, o: Self) {
        self.secret += o.secret;
        self.non_sensitive += o.non_sensitive;
    }
}

/// Per-class counts. For the NonSensitive class a "prediction" is an
/// annotated span that was not flagged; unannotated findings only affect the
/// Secret class.
pub fn class_counts(findings: &[Span], annotations: &[Annotation]) -> Result<ClassCounts, EvalError> {
    check_spans(findings)?;
    check_spans(annotations.iter().map(|a| a.span()).collect::<Vec<_>>().iter())?;

    let flagged: BTreeSet<Span> = findings.iter().copied().collect();
    let secret: BTreeSet<Span> = annotations
        .iter()
        .filter(|a| a.label == Label::Secret)
        .map(|a| a.span())
        .collect();
    let benign: BTreeSet<Span> = annotations
        .iter()
        .filter(|a| a.label == Label::NonSensitive)
        .map(|a| a.span())
        .collect();

    let tp = flagged.intersection(&secret).count() as u64;
    let fp = flagged.difference(&secret).count() as u64;
    let fn_ = secret.difference(&flagged).count() as u64;
    let tn = benign.difference(&flagged).count() as u64;
    let benign_flagged = benign.intersection(&flagged).count() as u64;

    Ok(ClassCounts {
        secret: ConfusionCounts { tp, fp, fn_, tn },
        non_sensitive: ConfusionCounts {
            tp: tn,
            fp: fn_,
            fn_: benign_flagged,
            tn: tp,
        },
    })
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> Metrics {
    let precision = if c.tp + c.fp == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    Metrics::from_precision_recall(precision, recall)
}

/// Unweighted mean of each field across classes.
pub fn macro_average(per_class: &[Metrics]) -> Result<Metrics, EvalError> {
    if per_class.is_empty() {
        return Err(EvalError::EmptyMacro);
    }
    let n = per_class.len() as f64;
    let sum = |f: fn(&Metrics) -> f64| per_class.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        precision: sum(|m| m.precision),
        recall: sum(|m| m.recall),
        f1: sum(|m| m.f1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub counts: ClassCounts,
    pub secret: Metrics,
    pub non_sensitive: Metrics,
    #[serde(rename = "macro")]
    pub macro_avg: Metrics,
}

impl SystemReport {
    fn from_counts(counts: ClassCounts) -> Self {
        let secret = precision_recall_f1(&counts.secret);
        let non_sensitive = precision_recall_f1(&counts.non_sensitive);
        let macro_avg = macro_average(&[secret, non_sensitive]).expect("two classes");
        SystemReport {
            counts,
            secret,
            non_sensitive,
            macro_avg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedAnnotation {
    pub document: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    pub candidates: usize,
    pub annotations: usize,
    pub classifier_id: String,
    pub threshold: f64,
    pub regex_only: SystemReport,
    pub pipeline: SystemReport,
    /// Secret annotations no rule matched; non-empty means the corpus does
    /// not give the regex stage full recall.
    pub unmatched_secret_annotations: Vec<UnmatchedAnnotation>,
    /// Pipeline findings that were not regex candidates. Always zero.
    pub subset_violations: usize,
}

impl EvalReport {
    pub fn is_conforming(&self) -> bool {
        self.unmatched_secret_annotations.is_empty()
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "documents {}  annotations {}  candidates {}  classifier {} @ {}",
            self.documents, self.annotations, self.candidates, self.classifier_id, self.threshold
        )?;
        writeln!(f, "{:<12} {:<14} {}", "system", "class", "metrics (span-level)")?;
        for (name, r) in [("regex-only", &self.regex_only), ("pipeline", &self.pipeline)] {
            writeln!(f, "{:<12} {:<14} {}", name, "Secret", r.secret)?;
            writeln!(f, "{:<12} {:<14} {}", "", "NonSensitive", r.non_sensitive)?;
            writeln!(f, "{:<12} {:<14} {}", "", "Macro", r.macro_avg)?;
        }
        if !self.is_conforming() {
            writeln!(
                f,
                "warning: {} Secret annotations are not matched by any rule",
                self.unmatched_secret_annotations.len()
            )?;
            for u in &self.unmatched_secret_annotations {
                writeln!(f, "  {} [{}, {})", u.document, u.start, u.end)?;
            }
        }
        Ok(())
    }
}

/// Scores the regex-only baseline and the full pipeline side by side.
pub fn evaluate_pipeline(corpus: &LabeledCorpus, analyzer: &Analyzer) -> Result<EvalReport, EvalError> {
    corpus.validate()?;
    let mut regex_counts = ClassCounts::default();
    let mut pipe_counts = ClassCounts::default();
    let mut unmatched = Vec::new();
    let mut candidates_total = 0;
    let mut annotations_total = 0;
    let mut subset_violations = 0;

    for doc in &corpus.documents {
        let run = analyzer.run(&doc.text, None)?;
        let labels = run.classifications?;
        let candidate_spans: Vec<Span> = run.candidates.iter().map(|c| c.span).collect();
        let finding_spans: Vec<Span> = run
            .candidates
            .iter()
            .zip(&labels)
            .filter(|(_, l)| l.is_secret())
            .map(|(c, _)| c.span)
            .collect();

        let candidate_set: BTreeSet<Span> = candidate_spans.iter().copied().collect();
        subset_violations += finding_spans.iter().filter(|s| !candidate_set.contains(s)).count();
        for a in doc.annotations.iter().filter(|a| a.label == Label::Secret) {
            if !candidate_set.contains(&a.span()) {
                unmatched.push(UnmatchedAnnotation {
                    document: doc.id.clone(),
                    start: a.start,
                    end: a.end,
                });
            }
        }

        regex_counts += class_counts(&candidate_spans, &doc.annotations)?;
        pipe_counts += class_counts(&finding_spans, &doc.annotations)?;
        candidates_total += candidate_set.len();
        annotations_total += doc.annotations.len();
    }

    Ok(EvalReport {
        documents: corpus.documents.len(),
        candidates: candidates_total,
        annotations: annotations_total,
        classifier_id: analyzer.classifier_id().to_string(),
        threshold: analyzer.threshold(),
        regex_only: SystemReport::from_counts(regex_counts),
        pipeline: SystemReport::from_counts(pipe_counts),
        unmatched_secret_annotations: unmatched,
        subset_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub document: usize,
    pub repetition: usize,
    pub extraction_ms: f64,
    pub classification_ms: f64,
    /// Server-reported pipeline time.
    pub total_ms: f64,
    /// Client-measured HTTP round trip.
    pub round_trip_ms: f64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

/// Nearest-rank percentile of an ascending slice.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

impl Aggregate {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Aggregate::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Aggregate {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p50: nearest_rank(&sorted, 0.50),
            p95: nearest_rank(&sorted, 0.95),
            max: *sorted.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub samples: Vec<LatencySample>,
    pub extraction_ms: Aggregate,
    pub classification_ms: Aggregate,
    pub total_ms: Aggregate,
    pub round_trip_ms: Aggregate,
}

impl LatencyReport {
    pub fn from_samples(samples: Vec<LatencySample>) -> Self {
        let col = |f: fn(&LatencySample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
        LatencyReport {
            extraction_ms: Aggregate::from_values(&col(|s| s.extraction_ms)),
            classification_ms: Aggregate::from_values(&col(|s| s.classification_ms)),
            total_ms: Aggregate::from_values(&col(|s| s.total_ms)),
            round_trip_ms: Aggregate::from_values(&col(|s| s.round_trip_ms)),
            samples,
        }
    }
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples {}", self.samples.len())?;
        writeln!(f, "{:<18} {:>9} {:>9} {:>9} {:>9}", "stage (ms)", "mean", "p50", "p95", "max")?;
        for (name, a) in [
            ("extraction", &self.extraction_ms),
            ("classification", &self.classification_ms),
            ("server total", &self.total_ms),
            ("round trip", &self.round_trip_ms),
        ] {
            writeln!(f, "{:<18} {:>9.3} {:>9.3} {:>9.3} {:>9.3}", name, a.mean, a.p50, a.p95, a.max)?;
        }
        Ok(())
    }
}

/// Posts every document `repetitions` times, sequentially, to the service
/// at `target` (base URL such as `http://127.0.0.1:8000`).
///
/// Samples are ordered document-major: all repetitions of document 0 first.
pub fn measure_latency(documents: &[String], target: &str, repetitions: usize) -> Result<LatencyReport, EvalError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(std::time::Duration::from_secs(30)))
        .build()
        .into();
    let url = format!("{}/analyze", target.trim_end_matches('/'));
    let unreachable = |message: String| EvalError::Unreachable {
        target: target.to_string(),
        message,
    };

    let mut samples = Vec::with_capacity(documents.len() * repetitions);
    for (d, doc) in documents.iter().enumerate() {
        let body = serde_json::to_vec(&AnalysisRequest::new(doc.as_str())).expect("request serializes");
        for r in 0..repetitions {
            let t0 = Instant::now();
            let mut resp = agent
                .post(&url)
                .header("Content-Type", "application/json")
                .send(&body[..])
                .map_err(|e| unreachable(e.to_string()))?;
            let bytes = resp
                .body_mut()
                .with_config()
                .limit(64 << 20)
                .read_to_vec()
                .map_err(|e| unreachable(e.to_string()))?;
            let round_trip = t0.elapsed();
            let parsed: AnalysisResponse =
                serde_json::from_slice(&bytes).map_err(|e| unreachable(format!("bad response: {e}")))?;
            samples.push(LatencySample {
                document: d,
                repetition: r,
                extraction_ms: parsed.timing.extraction_ms,
                classification_ms: parsed.timing.classification_ms,
                total_ms: parsed.timing.total_ms,
                round_trip_ms: round_trip.as_secs_f64() * 1000.0,
                cache_misses: parsed.cache.misses,
            });
        }
    }
    Ok(LatencyReport::from_samples(samples))
}
