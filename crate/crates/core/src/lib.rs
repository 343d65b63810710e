//! Pre-submission secret leak detection for issue-report text.
//!
//! The pipeline has three stages:
//!
//! 1. [`scan`] runs a data-driven [`catalog`] of secret-format rules over
//!    the text and yields candidates, each with a 200-character context
//!    window.
//! 2. [`classify`] labels every candidate Secret or NonSensitive from the
//!    candidate plus its context, with results memoized in [`cache`].
//! 3. Only Secret-labeled candidates are reported.
//!
//! [`service`] wraps the pipeline in a local HTTP service and
//! [`evaluation`] scores it against labeled corpora.

pub mod cache;
pub mod catalog;
pub mod classify;
pub mod commands;
pub mod evaluation;
pub mod redact;
pub mod scan;
pub mod service;

pub use cache::{CacheKey, CacheStats, ResultCache};
pub use catalog::{
    compile_catalog, load_catalog, serialize_catalog, validate_rule, Category, CatalogError,
    CompiledMatcher, RuleCatalog, RuleRecord,
};
pub use classify::{
    classify, filter_findings, heuristic_score, Classification, Classifier, ClassifierSpec, Finding,
    Label,
};
pub use scan::{dedupe_candidates, extract_candidates, extract_context, Candidate, ContextWindow, Span};
pub use service::{AnalysisRequest, AnalysisResponse, Analyzer, ServiceConfig};
