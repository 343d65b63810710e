//! LRU memoization of classification results.
//!
//! Keys hash everything a classification depends on, including the
//! classifier id and threshold, so switching either never serves a stale
//! label. Only identical `(candidate, context)` pairs hit.

use std::fmt;
use std::num::NonZeroUsize;

use lru::LruCache;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::Classification;
use crate::scan::ContextWindow;

pub const DEFAULT_CACHE_CAPACITY: usize = 10_000;

/// SHA-256 digest of the classification inputs.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn new(
        candidate: &str,
        context: &ContextWindow,
        classifier_id: &str,
        threshold: f64,
    ) -> Self {
        let mut h = Sha256::new();
        for field in [
            candidate,
            context.before.as_str(),
            context.after.as_str(),
            classifier_id,
        ] {
            // length prefix keeps field boundaries unambiguous
            h.update((field.len() as u64).to_le_bytes());
            h.update(field.as_bytes());
        }
        h.update(threshold.to_bits().to_le_bytes());
        CacheKey(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheKey({})", hex::encode(&self.0[..8]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub size: usize,
    pub capacity: usize,
}

struct Inner {
    // None when capacity is 0
    lru: Option<LruCache<CacheKey, Classification>>,
    stats: CacheStats,
}

/// Thread-safe LRU cache of classifications.
pub struct ResultCache {
    inner: Mutex<Inner>,
}

impl fmt::Debug for ResultCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResultCache").field("stats", &self.stats()).finish()
    }
}

impl Default for ResultCache {
    fn default() -> Self {
        ResultCache::new(DEFAULT_CACHE_CAPACITY)
    }
}

impl ResultCache {
    pub fn new(capacity: usize) -> Self {
        ResultCache {
            inner: Mutex::new(Inner {
                lru: NonZeroUsize::new(capacity).map(LruCache::new),
                stats: CacheStats {
                    capacity,
                    ..CacheStats::default()
                },
            }),
        }
    }

    /// Looks up `key`, promoting it to most-recently-used on a hit.
    pub fn get(&self, key: &CacheKey) -> Option<Classification> {
        let mut inner = self.inner.lock();
        let found = inner.lru.as_mut().and_then(|l| l.get(key).cloned());
        if found.is_some() {
            inner.stats.hits += 1;
        } else {
            inner.stats.misses += 1;
        }
        found
    }

    /// Inserts or updates `key` as most-recently-used, evicting the
    /// least-recently-used entry when full.
    pub fn put(&self, key: CacheKey, value: Classification) {
        let mut inner = self.inner.lock();
        let Inner { lru, stats } = &mut *inner;
        let Some(lru) = lru.as_mut() else {
            return;
        };
        if let Some((old_key, _)) = lru.push(key, value) {
            if old_key != key {
                stats.evictions += 1;
            }
        }
        stats.size = lru.len();
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.inner
            .lock()
            .lru
            .as_ref()
            .is_some_and(|l| l.contains(key))
    }

    pub fn stats(&self) -> CacheStats {
        self.inner.lock().stats
    }

    pub fn capacity(&self) -> usize {
        self.inner.lock().stats.capacity
    }
}
