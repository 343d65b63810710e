//! Candidate extraction: runs the compiled catalog over a document and
//! attaches a context window to each hit.
//!
//! Spans are byte offsets (exact for editor highlighting). Context windows
//! are counted in Unicode scalar values, 200 in total, split 100/100 with
//! the unused part of a short side handed to the other side. The candidate
//! text itself is not part of the window.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CompiledMatcher;
use crate::redact::mask;

/// Total characters of context around a candidate.
pub const CONTEXT_BUDGET: usize = 200;
/// Nominal characters on each side before redistribution.
pub const CONTEXT_SIDE: usize = CONTEXT_BUDGET / 2;
/// Default document size cap (1 MiB).
pub const DEFAULT_MAX_DOCUMENT_BYTES: usize = 1 << 20;

/// Half-open byte range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct ContextWindow {
    pub before: String,
    pub after: String,
}

impl ContextWindow {
    pub fn new(before: impl Into<String>, after: impl Into<String>) -> Self {
        ContextWindow {
            before: before.into(),
            after: after.into(),
        }
    }

    /// Characters used out of [`CONTEXT_BUDGET`].
    pub fn char_len(&self) -> usize {
        self.before.chars().count() + self.after.chars().count()
    }
}

// context may hold neighbouring secrets; never print it
impl fmt::Debug for ContextWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContextWindow")
            .field("before_chars", &self.before.chars().count())
            .field("after_chars", &self.after.chars().count())
            .finish()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Candidate {
    pub text: String,
    pub span: Span,
    pub rule_id: String,
    pub context: ContextWindow,
}

impl fmt::Debug for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Candidate")
            .field("text", &mask(&self.text))
            .field("span", &self.span)
            .field("rule_id", &self.rule_id)
            .field("context", &self.context)
            .finish()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScanError {
    #[error("document is {size} bytes, limit is {limit}")]
    DocumentTooLarge { size: usize, limit: usize },
    #[error("span {span} is not valid for a document of {len} bytes")]
    InvalidSpan { span: Span, len: usize },
}

/// Extracts candidates with the default 1 MiB document cap.
pub fn extract_candidates(
    document: &str,
    matcher: &CompiledMatcher,
) -> Result<Vec<Candidate>, ScanError> {
    extract_candidates_with_limit(document, matcher, DEFAULT_MAX_DOCUMENT_BYTES)
}

/// All catalog matches in `document`, ordered by `(start, rule_id)`.
pub fn extract_candidates_with_limit(
    document: &str,
    matcher: &CompiledMatcher,
    max_bytes: usize,
) -> Result<Vec<Candidate>, ScanError> {
    if document.len() > max_bytes {
        return Err(ScanError::DocumentTooLarge {
            size: document.len(),
            limit: max_bytes,
        });
    }
    let mut hits = matcher.find_all(document);
    hits.sort_by(|a, b| {
        (a.start, &a.rule_id, a.end).cmp(&(b.start, &b.rule_id, b.end))
    });
    hits.into_iter()
        .map(|m| {
            let span = Span::new(m.start, m.end);
            Ok(Candidate {
                text: document[m.start..m.end].to_string(),
                context: extract_context(document, span)?,
                span,
                rule_id: m.rule_id,
            })
        })
        .collect()
}

fn check_span(document: &str, span: Span) -> Result<(), ScanError> {
    let ok = span.start < span.end
        && span.end <= document.len()
        && document.is_char_boundary(span.start)
        && document.is_char_boundary(span.end);
    if ok {
        Ok(())
    } else {
        Err(ScanError::InvalidSpan {
            span,
            len: document.len(),
        })
    }
}

/// Context window around `span`, excluding the span itself.
pub fn extract_context(document: &str, span: Span) -> Result<ContextWindow, ScanError> {
    check_span(document, span)?;
    let head = &document[..span.start];
    let tail = &document[span.end..];

    // byte offsets of up to CONTEXT_BUDGET chars on each side
    let before_starts: Vec<usize> = head
        .char_indices()
        .rev()
        .take(CONTEXT_BUDGET)
        .map(|(i, _)| i)
        .collect();
    let after_ends: Vec<usize> = tail
        .char_indices()
        .skip(1)
        .map(|(i, _)| i)
        .chain(std::iter::once(tail.len()))
        .take(CONTEXT_BUDGET)
        .collect();
    let after_ends = if tail.is_empty() { Vec::new() } else { after_ends };

    let before_avail = before_starts.len();
    let after_avail = after_ends.len();
    let before_n = before_avail.min(CONTEXT_SIDE + CONTEXT_SIDE.saturating_sub(after_avail));
    let after_n = after_avail.min(CONTEXT_SIDE + CONTEXT_SIDE.saturating_sub(before_avail));

    let before = if before_n == 0 {
        ""
    } else {
        &head[before_starts[before_n - 1]..]
    };
    let after = if after_n == 0 {
        ""
    } else {
        &tail[..after_ends[after_n - 1]]
    };
    Ok(ContextWindow::new(before, after))
}

/// Drops exact duplicates (same span and rule id), keeping first occurrences.
pub fn dedupe_candidates(candidates: Vec<Candidate>) -> Vec<Candidate> {
    let mut seen = std::collections::HashSet::new();
    candidates
        .into_iter()
        .filter(|c| seen.insert((c.span, c.rule_id.clone())))
        .collect()
}
