//! Structural content diff between an upstream parent revision and a fork
//! revision.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::levenshtein::similarity_chars;
use crate::lineage::{PageRecord, PageStatus};
use crate::wikitext::{parse_wikitext, WikitextElements};

/// Similarity a deleted/inserted sentence pair must strictly exceed to count
/// as one changed sentence.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct SimilarityThreshold(f64);

impl SimilarityThreshold {
    pub const DEFAULT: SimilarityThreshold = SimilarityThreshold(0.6);

    pub fn new(value: f64) -> Result<Self, InvalidThreshold> {
        if value > 0.0 && value < 1.0 {
            Ok(SimilarityThreshold(value))
        } else {
            Err(InvalidThreshold(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for SimilarityThreshold {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl<'de> Deserialize<'de> for SimilarityThreshold {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        SimilarityThreshold::new(value).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvalidThreshold(pub f64);

impl core::fmt::Display for InvalidThreshold {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "similarity threshold {} is outside the open range (0, 1)", self.0)
    }
}

impl core::error::Error for InvalidThreshold {}

/// A deleted sentence matched to an inserted one.
///
/// Serialised as `[old, new, similarity]` with the similarity rounded to four
/// decimal places.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangedPair {
    pub old: String,
    pub new: String,
    pub similarity: f64,
}

impl Serialize for ChangedPair {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rounded = libm::round(self.similarity * 10_000.0) / 10_000.0;
        (&self.old, &self.new, rounded).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ChangedPair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (old, new, similarity) = <(String, String, f64)>::deserialize(deserializer)?;
        Ok(ChangedPair { old, new, similarity })
    }
}

/// Reference domains on one side of a diff, each with the URLs seen for it.
pub type ReferenceDelta = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContentDiff {
    pub title: String,
    pub inserted: Vec<String>,
    pub deleted: Vec<String>,
    pub changed: Vec<ChangedPair>,
    pub categories_added: BTreeSet<String>,
    pub categories_removed: BTreeSet<String>,
    pub references_added: ReferenceDelta,
    pub references_removed: ReferenceDelta,
    pub media_added: BTreeSet<String>,
    pub media_removed: BTreeSet<String>,
    pub templates_added: BTreeSet<String>,
    pub templates_removed: BTreeSet<String>,
    pub tags_added: BTreeSet<String>,
    pub tags_removed: BTreeSet<String>,
}

impl ContentDiff {
    /// Whether any sentence was inserted, deleted or changed.
    pub fn has_text_change(&self) -> bool {
        !(self.inserted.is_empty() && self.deleted.is_empty() && self.changed.is_empty())
    }

    pub fn is_empty(&self) -> bool {
        !self.has_text_change()
            && self.categories_added.is_empty()
            && self.categories_removed.is_empty()
            && self.references_added.is_empty()
            && self.references_removed.is_empty()
            && self.media_added.is_empty()
            && self.media_removed.is_empty()
            && self.templates_added.is_empty()
            && self.templates_removed.is_empty()
            && self.tags_added.is_empty()
            && self.tags_removed.is_empty()
    }

    /// Text on the upstream side: deleted sentences and old sides of pairs.
    pub fn deleted_text(&self) -> impl Iterator<Item = &str> {
        self.deleted.iter().map(String::as_str).chain(self.changed.iter().map(|p| p.old.as_str()))
    }

    /// Text on the fork side: inserted sentences and new sides of pairs.
    pub fn added_text(&self) -> impl Iterator<Item = &str> {
        self.inserted.iter().map(String::as_str).chain(self.changed.iter().map(|p| p.new.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffError {
    /// Only `changed` records carry a revision pair to diff.
    NotChanged { title: String, status: PageStatus },
    /// A changed record without one of the two texts, typically a lineage
    /// that found no upstream parent.
    MissingText { title: String },
}

impl core::fmt::Display for DiffError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DiffError::NotChanged { title, status } => {
                write!(f, "page `{title}` has status {status}; only changed pages are diffed")
            }
            DiffError::MissingText { title } => write!(f, "page `{title}` lacks fork or upstream text"),
        }
    }
}

impl core::error::Error for DiffError {}

/// Result of [`pair_changed`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairing {
    pub changed: Vec<ChangedPair>,
    pub inserted: Vec<String>,
    pub deleted: Vec<String>,
}

/// Greedy best-first matching of deleted to inserted sentences.
///
/// Repeatedly accepts the most similar unused pair whose similarity is
/// strictly above `threshold`. Ties go to the earlier deleted sentence, then
/// the earlier inserted one. Pairs are returned in deleted-sentence order.
pub fn pair_changed(inserted: &[String], deleted: &[String], threshold: SimilarityThreshold) -> Pairing {
    let t = threshold.value();
    let ins_chars: Vec<Vec<char>> = inserted.iter().map(|s| s.chars().collect()).collect();
    let del_chars: Vec<Vec<char>> = deleted.iter().map(|s| s.chars().collect()).collect();

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (d, dc) in del_chars.iter().enumerate() {
        for (i, ic) in ins_chars.iter().enumerate() {
            let (short, long) = if dc.len() <= ic.len() { (dc.len(), ic.len()) } else { (ic.len(), dc.len()) };
            // similarity never exceeds short/long
            if long > 0 && (short as f64 / long as f64) <= t {
                continue;
            }
            let sim = similarity_chars(dc, ic);
            if sim > t {
                candidates.push((sim, d, i));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut used_del = alloc::vec![false; deleted.len()];
    let mut used_ins = alloc::vec![false; inserted.len()];
    let mut accepted: Vec<(usize, usize, f64)> = Vec::new();
    for (sim, d, i) in candidates {
        if !used_del[d] && !used_ins[i] {
            used_del[d] = true;
            used_ins[i] = true;
            accepted.push((d, i, sim));
        }
    }
    accepted.sort_by_key(|&(d, _, _)| d);

    Pairing {
        changed: accepted
            .into_iter()
            .map(|(d, i, similarity)| ChangedPair { old: deleted[d].clone(), new: inserted[i].clone(), similarity })
            .collect(),
        inserted: inserted.iter().zip(&used_ins).filter(|(_, u)| !**u).map(|(s, _)| s.clone()).collect(),
        deleted: deleted.iter().zip(&used_del).filter(|(_, u)| !**u).map(|(s, _)| s.clone()).collect(),
    }
}

/// Diff a `changed` page record.
pub fn diff_pages(record: &PageRecord, threshold: SimilarityThreshold) -> Result<ContentDiff, DiffError> {
    if record.status != PageStatus::Changed {
        return Err(DiffError::NotChanged { title: record.title.clone(), status: record.status });
    }
    match (&record.upstream_text, &record.fork_text) {
        (Some(base), Some(fork)) => Ok(diff_texts(&record.title, base, fork, threshold)),
        _ => Err(DiffError::MissingText { title: record.title.clone() }),
    }
}

/// Diff two wikitext revisions, upstream (`base`) against `fork`.
pub fn diff_texts(title: &str, base: &str, fork: &str, threshold: SimilarityThreshold) -> ContentDiff {
    let base = parse_wikitext(base);
    let fork = parse_wikitext(fork);
    diff_elements(title, &base, &fork, threshold)
}

pub fn diff_elements(
    title: &str,
    base: &WikitextElements,
    fork: &WikitextElements,
    threshold: SimilarityThreshold,
) -> ContentDiff {
    let deleted = multiset_difference(&base.sentences, &fork.sentences);
    let inserted = multiset_difference(&fork.sentences, &base.sentences);
    let pairing = pair_changed(&inserted, &deleted, threshold);

    let base_refs = references_by_domain(base);
    let fork_refs = references_by_domain(fork);

    ContentDiff {
        title: title.into(),
        inserted: pairing.inserted,
        deleted: pairing.deleted,
        changed: pairing.changed,
        categories_added: set_difference(&fork.categories, &base.categories),
        categories_removed: set_difference(&base.categories, &fork.categories),
        references_added: domain_difference(&fork_refs, &base_refs),
        references_removed: domain_difference(&base_refs, &fork_refs),
        media_added: set_difference(&fork.media, &base.media),
        media_removed: set_difference(&base.media, &fork.media),
        templates_added: set_difference(&fork.templates, &base.templates),
        templates_removed: set_difference(&base.templates, &fork.templates),
        tags_added: set_difference(&fork.tags, &base.tags),
        tags_removed: set_difference(&base.tags, &fork.tags),
    }
}

/// Items of `a` not matched one-for-one by items of `b`, in `a`'s order.
fn multiset_difference(a: &[String], b: &[String]) -> Vec<String> {
    let mut available: BTreeMap<&str, usize> = BTreeMap::new();
    for s in b {
        *available.entry(s.as_str()).or_default() += 1;
    }
    let mut out = Vec::new();
    for s in a {
        match available.get_mut(s.as_str()) {
            Some(n) if *n > 0 => *n -= 1,
            _ => out.push(s.clone()),
        }
    }
    out
}

fn set_difference(a: &BTreeSet<String>, b: &BTreeSet<String>) -> BTreeSet<String> {
    a.difference(b).cloned().collect()
}

fn references_by_domain(el: &WikitextElements) -> ReferenceDelta {
    let mut map = ReferenceDelta::new();
    for r in &el.references {
        if !r.domain.is_empty() {
            map.entry(r.domain.clone()).or_default().insert(r.url.clone());
        }
    }
    map
}

fn domain_difference(a: &ReferenceDelta, b: &ReferenceDelta) -> ReferenceDelta {
    a.iter().filter(|(domain, _)| !b.contains_key(*domain)).map(|(d, urls)| (d.clone(), urls.clone())).collect()
}
