//! Reference heuristic scorer.
//!
//! The score is a clamped weighted sum of these features:
//!
//! | feature                                        | weight          |
//! |------------------------------------------------|-----------------|
//! | normalized Shannon entropy of the candidate    | `+0.55 * e`     |
//! | length band: <8 / 8-15 / 16-64 / >64 chars     | `0 / +0.10 / +0.20 / +0.15` |
//! | placeholder lexicon hit in the candidate       | `-0.70`         |
//! | masking characters (`*`, `…`, `•`, `...`)      | `-0.50`         |
//! | bare hex digest (32, 40 or 64 lowercase hex)   | `-0.40`         |
//! | documentation words in the context             | `-0.20`         |
//! | leak words in the context                      | `+0.25`         |
//!
//! Entropy is normalized by `log2(min(len, 64))`, the largest entropy a
//! string of that length can reach over a 64-symbol alphabet.
//! Each lexicon feature fires at most once.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{Classifier, ClassifierError, ClassifierInput};
use crate::scan::ContextWindow;

pub const HEURISTIC_ID: &str = "heuristic-v1";

pub(crate) const W_ENTROPY: f64 = 0.55;
pub(crate) const W_PLACEHOLDER: f64 = -0.70;
pub(crate) const W_MASKED: f64 = -0.50;
pub(crate) const W_HEX_DIGEST: f64 = -0.40;
pub(crate) const W_CONTEXT_DOCS: f64 = -0.20;
pub(crate) const W_CONTEXT_LEAK: f64 = 0.25;

/// Case-insensitive substrings that mark a placeholder value.
pub(crate) const PLACEHOLDER_LEXICON: &[&str] = &[
    "example",
    "your",
    "dummy",
    "sample",
    "redacted",
    "placeholder",
    "xxx",
    "<",
    ">",
    "1234567890",
    "changeme",
    "change_me",
    "change-me",
    "insert",
    "replace",
    "fake",
    "here",
    "abcdef",
    "000000",
    "{{",
    "${",
    "todo",
];

static CONTEXT_DOCS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?:\b(?:example\w*|replace\w*|docs?|documentation|readme|placeholder\w*|sample\w*|dummy|fake|template\w*|tutorial)\b|\be\.g\.)",
    )
    .unwrap()
});

static CONTEXT_LEAK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:prod\w*|leak\w*|oops|accidental\w*|real|exposed|compromised|committed|pushed)\b",
    )
    .unwrap()
});

static HEX_DIGEST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[0-9a-f]{32}|[0-9a-f]{40}|[0-9a-f]{64})$").unwrap());

/// Shannon entropy in bits per character.
pub fn shannon_entropy(text: &str) -> f64 {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut n = 0usize;
    for c in text.chars() {
        *counts.entry(c).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    // fixed summation order keeps the score bit-identical across runs
    let mut counts: Vec<usize> = counts.into_values().collect();
    counts.sort_unstable();
    counts
        .into_iter()
        .map(|k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Entropy scaled to `[0, 1]`.
pub fn normalized_entropy(text: &str) -> f64 {
    let n = text.chars().count();
    if n < 2 {
        return 0.0;
    }
    let max = (n.min(64) as f64).log2();
    (shannon_entropy(text) / max).clamp(0.0, 1.0)
}

fn length_band(len: usize) -> f64 {
    match len {
        0..=7 => 0.0,
        8..=15 => 0.10,
        16..=64 => 0.20,
        _ => 0.15,
    }
}

pub(crate) fn has_placeholder(text: &str) -> bool {
    let lower = text.to_lowercase();
    PLACEHOLDER_LEXICON.iter().any(|w| lower.contains(w))
}

fn is_masked(text: &str) -> bool {
    text.contains(['*', '…', '•']) || text.contains("...")
}

/// Heuristic probability that `candidate` is a real secret.
pub fn heuristic_score(candidate: &str, context: &ContextWindow) -> f64 {
    let len = candidate.chars().count();
    let mut score = W_ENTROPY * normalized_entropy(candidate) + length_band(len);
    if has_placeholder(candidate) {
        score += W_PLACEHOLDER;
    }
    if is_masked(candidate) {
        score += W_MASKED;
    }
    if HEX_DIGEST.is_match(candidate) {
        score += W_HEX_DIGEST;
    }
    let docs = CONTEXT_DOCS.is_match(&context.before) || CONTEXT_DOCS.is_match(&context.after);
    if docs {
        score += W_CONTEXT_DOCS;
    }
    let leak = CONTEXT_LEAK.is_match(&context.before) || CONTEXT_LEAK.is_match(&context.after);
    if leak {
        score += W_CONTEXT_LEAK;
    }
    score.clamp(0.0, 1.0)
}

/// Stateless classifier backed by [`heuristic_score`].
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicClassifier;

impl Classifier for HeuristicClassifier {
    fn id(&self) -> &str {
        HEURISTIC_ID
    }

    fn score_batch(&self, items: &[ClassifierInput<'_>]) -> Result<Vec<f64>, ClassifierError> {
        Ok(items
            .iter()
            .map(|i| heuristic_score(i.candidate, i.context))
            .collect())
    }
}
