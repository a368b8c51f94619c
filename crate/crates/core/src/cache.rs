//! The pre-draft cache: verified-output key -> pre-drafted batch.
//!
//! Keys are the exact emitted token sequence of an exit (all delta+1 tokens).
//! The cache is generational: `reset` bumps the generation, so insertions
//! from jobs that started before a reset are silently discarded and lookups
//! never observe entries from an earlier round.

use crate::decode::BatchPayload;
use crate::types::TokenSeq;
use std::collections::{HashMap, HashSet};

/// A pre-drafted continuation stored under an exit-output key.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub tokens: TokenSeq,
    pub payload: BatchPayload,
}

#[derive(Debug, Default)]
pub struct PreDraftCache {
    generation: u64,
    entries: HashMap<Vec<u32>, CacheEntry>,
    /// Keys with a pre-draft job in flight this generation; used to avoid
    /// drafting the same exit output twice.
    pending: HashSet<Vec<u32>>,
}

impl PreDraftCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// True when `key` already has a completed entry or an in-flight job.
    pub fn knows(&self, key: &[u32]) -> bool {
        self.entries.contains_key(key) || self.pending.contains(key)
    }

    /// Claim a key for an in-flight job. Returns false when the key is
    /// already known (the caller must then skip the job).
    pub fn begin_job(&mut self, key: &[u32]) -> bool {
        if self.knows(key) {
            return false;
        }
        self.pending.insert(key.to_vec());
        true
    }

    /// Insert a completed pre-draft. Entries from stale generations are
    /// discarded; returns whether the insert took effect.
    pub fn insert(&mut self, generation: u64, key: Vec<u32>, entry: CacheEntry) -> bool {
        if generation != self.generation {
            return false;
        }
        self.pending.remove(&key);
        self.entries.insert(key, entry);
        true
    }

    /// Exact-match lookup against the current generation.
    pub fn lookup(&self, key: &[u32]) -> Option<&CacheEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Clear everything and open the next generation.
    pub fn reset(&mut self) {
        self.generation += 1;
        self.entries.clear();
        self.pending.clear();
    }
}
