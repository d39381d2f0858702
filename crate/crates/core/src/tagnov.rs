//! Tag-surprise novelty.
//!
//! For a focal image with tag set `T` preceded by `|I|` images,
//! `P(t) = (count(t) + 1) / (|I| + 1)` counts the focal image itself, and
//! the raw novelty is `-(1/|T|) Σ ln P(t)`. Dividing by `ln(|I| + 1)`, the
//! surprise of a tag nobody used before, maps it onto `[0, 1]`.

use std::collections::{BTreeSet, HashMap};

use crate::feature_store::ShotRecord;

/// Running per-tag image counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagLedger {
    counts: HashMap<String, u64>,
    total: u64,
}

impl TagLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of images ingested so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, tag: &str) -> u64 {
        self.counts.get(tag).copied().unwrap_or(0)
    }

    pub fn n_tags(&self) -> usize {
        self.counts.len()
    }

    /// Counts one image. Repeated tags within an image count once.
    pub fn ingest<S: AsRef<str>>(&mut self, tags: &[S]) {
        for tag in unique(tags) {
            *self.counts.entry(tag.to_string()).or_insert(0) += 1;
        }
        self.total += 1;
    }

    /// `(raw, normalized)` novelty of an image with `tags` arriving after
    /// everything ingested so far.
    pub fn novelty<S: AsRef<str>>(&self, tags: &[S]) -> (f64, f64) {
        let tags = unique(tags);
        if tags.is_empty() {
            return (0.0, 0.0);
        }
        let denom = ((self.total + 1) as f64).ln();
        let surprise: f64 = tags
            .iter()
            .map(|t| denom - ((self.count(t) + 1) as f64).ln())
            .sum();
        let raw = surprise / tags.len() as f64;
        if self.total == 0 {
            return (raw, 1.0);
        }
        (raw, (raw / denom).clamp(0.0, 1.0))
    }
}

fn unique<S: AsRef<str>>(tags: &[S]) -> BTreeSet<&str> {
    tags.iter().map(|t| t.as_ref()).collect()
}

/// Free-function form of [`TagLedger::novelty`].
pub fn tag_novelty<S: AsRef<str>>(ledger: &TagLedger, tags: &[S]) -> (f64, f64) {
    ledger.novelty(tags)
}

/// Free-function form of [`TagLedger::ingest`].
pub fn ingest<S: AsRef<str>>(mut ledger: TagLedger, tags: &[S]) -> TagLedger {
    ledger.ingest(tags);
    ledger
}

/// Scores every shot against the shots before it, in the given order.
pub fn score_corpus(shots: &[ShotRecord]) -> Vec<(f64, f64)> {
    let mut ledger = TagLedger::new();
    shots
        .iter()
        .map(|shot| {
            let score = ledger.novelty(&shot.tags);
            ledger.ingest(&shot.tags);
            score
        })
        .collect()
}
