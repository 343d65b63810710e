//! Batch entry points behind the `scan`, `eval` and `bench` subcommands.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use walkdir::WalkDir;

use crate::evaluation::{evaluate_pipeline, measure_latency, EvalError, LabeledCorpus, LatencyReport};
use crate::service::{AnalysisRequest, AnalysisResponse, AnalyzeError, Analyzer, FindingOut};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    pub path: String,
    pub findings: Vec<FindingOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degraded: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(skip)]
    line_starts: Vec<usize>,
}

impl FileReport {
    fn new(path: &Path) -> Self {
        FileReport {
            path: path.display().to_string(),
            findings: Vec::new(),
            degraded: None,
            error: None,
            skipped: None,
            line_starts: Vec::new(),
        }
    }

    fn line_col(&self, offset: usize) -> (usize, usize) {
        let line = self.line_starts.partition_point(|&s| s <= offset);
        let start = self.line_starts[line - 1];
        (line, offset - start + 1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub files: Vec<FileReport>,
    pub total_findings: usize,
    pub errors: usize,
}

impl ScanReport {
    pub fn exit_code(&self) -> i32 {
        if self.errors > 0 {
            EXIT_ERROR
        } else if self.total_findings > 0 {
            EXIT_FINDINGS
        } else {
            EXIT_CLEAN
        }
    }
}

fn expand(paths: &[PathBuf], files: &mut Vec<FileReport>) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in WalkDir::new(p).sort_by_file_name() {
                match entry {
                    Ok(e) if e.file_type().is_file() => out.push(e.into_path()),
                    Ok(_) => {}
                    Err(e) => {
                        let mut r = FileReport::new(e.path().unwrap_or(p));
                        r.error = Some(e.to_string());
                        files.push(r);
                    }
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    out
}

fn scan_file(path: &Path, analyzer: &Analyzer) -> FileReport {
    let mut report = FileReport::new(path);
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let Ok(text) = String::from_utf8(bytes) else {
        report.skipped = Some("not UTF-8 text".into());
        return report;
    };
    let text = text.replace("\r\n", "\n");
    report.line_starts = std::iter::once(0)
        .chain(text.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    match analyzer.analyze(&AnalysisRequest::new(text)) {
        Ok(AnalysisResponse {
            findings, warning, ..
        }) => {
            report.findings = findings;
            report.degraded = warning;
        }
        Err(AnalyzeError::TooLarge(e)) => report.skipped = Some(e.to_string()),
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Scans files and directories (recursively). CRLF line endings are
/// normalized before scanning, so spans refer to the normalized text.
pub fn scan_paths(paths: &[PathBuf], analyzer: &Analyzer) -> ScanReport {
    let mut files = Vec::new();
    for path in expand(paths, &mut files) {
        files.push(scan_file(&path, analyzer));
    }
    ScanReport {
        total_findings: files.iter().map(|f| f.findings.len()).sum(),
        errors: files.iter().filter(|f| f.error.is_some()).count(),
        files,
    }
}

pub fn write_scan_report(report: &ScanReport, format: OutputFormat, out: &mut dyn Write) -> io::Result<()> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)
        }
        OutputFormat::Text => {
            for f in &report.files {
                if let Some(e) = &f.error {
                    writeln!(out, "{}: error: {e}", f.path)?;
                }
                if let Some(s) = &f.skipped {
                    writeln!(out, "{}: skipped: {s}", f.path)?;
                }
                if let Some(w) = &f.degraded {
                    writeln!(out, "{}: warning: {w}", f.path)?;
                }
                for finding in &f.findings {
                    let (line, col) = f.line_col(finding.span_start);
                    let conf = finding
                        .confidence
                        .map(|c| format!("{c:.2}"))
                        .unwrap_or_else(|| "n/a".into());
                    writeln!(
                        out,
                        "{}:{line}:{col}: {:?} {} {} (confidence {conf})",
                        f.path, finding.label, finding.rule_id, finding.masked_text
                    )?;
                }
            }
            writeln!(
                out,
                "{} files scanned, {} findings, {} errors",
                report.files.len(),
                report.total_findings,
                report.errors
            )
        }
    }
}

pub fn run_eval(corpus: &LabeledCorpus, analyzer: &Analyzer, format: OutputFormat, out: &mut dyn Write) -> Result<i32, EvalError> {
    let report = evaluate_pipeline(corpus, analyzer)?;
    let io = |e: io::Error| EvalError::Corpus(e.to_string());
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| EvalError::Corpus(e.to_string()))?;
            writeln!(out).map_err(io)?;
        }
        OutputFormat::Text => write!(out, "{report}").map_err(io)?,
    }
    Ok(if report.is_conforming() { EXIT_CLEAN } else { EXIT_FINDINGS })
}

pub fn write_latency_report(report: &LatencyReport, format: OutputFormat, out: &mut dyn Write) -> io::Result<()> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)
        }
        OutputFormat::Text => write!(out, "{report}"),
    }
}

/// Benchmarks the service at `target` with every document of `corpus`.
pub fn run_bench(corpus: &LabeledCorpus, target: &str, repetitions: usize) -> Result<LatencyReport, EvalError> {
    let docs: Vec<String> = corpus.documents.iter().map(|d| d.text.clone()).collect();
    measure_latency(&docs, target, repetitions)
}
