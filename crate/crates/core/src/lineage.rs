//! Page lineage between a fork and its upstream wiki.

use alloc::collections::BTreeSet;
use alloc::string::String;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Metadata of one revision as reported by the MediaWiki API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionMeta {
    pub rev_id: u64,
    /// `0` marks a root revision.
    pub parent_id: u64,
    pub timestamp: DateTime<Utc>,
    pub user: String,
    pub is_bot: bool,
    #[serde(default)]
    pub comment: String,
}

impl RevisionMeta {
    /// The compound lineage key.
    pub fn key(&self) -> (u64, u64) {
        (self.rev_id, self.parent_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageStatus {
    Duplicated,
    Changed,
    Missing,
}

impl PageStatus {
    pub const ALL: [PageStatus; 3] = [PageStatus::Duplicated, PageStatus::Changed, PageStatus::Missing];

    pub fn as_str(self) -> &'static str {
        match self {
            PageStatus::Duplicated => "duplicated",
            PageStatus::Changed => "changed",
            PageStatus::Missing => "missing",
        }
    }
}

impl core::fmt::Display for PageStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for PageStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "duplicated" => Ok(PageStatus::Duplicated),
            "changed" => Ok(PageStatus::Changed),
            "missing" => Ok(PageStatus::Missing),
            other => Err(alloc::format!("unknown page status `{other}`")),
        }
    }
}

/// One fork/upstream page pair with the revisions to diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub title: String,
    pub status: PageStatus,
    pub fork_last_rev: Option<RevisionMeta>,
    pub upstream_parent_rev: Option<RevisionMeta>,
    pub fork_text: Option<String>,
    pub upstream_text: Option<String>,
}

impl PageRecord {
    pub fn missing(title: impl Into<String>) -> Self {
        PageRecord {
            title: title.into(),
            status: PageStatus::Missing,
            fork_last_rev: None,
            upstream_parent_rev: None,
            fork_text: None,
            upstream_text: None,
        }
    }
}

/// Outcome of matching a fork history into upstream history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineageMatch {
    pub status: PageStatus,
    /// Newest fork revision whose key also occurs upstream; `None` when the
    /// histories share no revision and the page needs manual review.
    pub upstream_parent: Option<RevisionMeta>,
}

impl LineageMatch {
    pub fn needs_review(&self) -> bool {
        self.upstream_parent.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyHistory;

impl core::fmt::Display for EmptyHistory {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("fork history is empty")
    }
}

impl core::error::Error for EmptyHistory {}

/// Classify a page from its fork history (newest first) and upstream history.
///
/// Only `(rev_id, parent_id)` pairs are compared.
pub fn match_lineage(
    fork_history: &[RevisionMeta],
    upstream_history: &[RevisionMeta],
) -> Result<LineageMatch, EmptyHistory> {
    let (newest, older) = fork_history.split_first().ok_or(EmptyHistory)?;
    let upstream: BTreeSet<(u64, u64)> = upstream_history.iter().map(RevisionMeta::key).collect();

    if upstream.contains(&newest.key()) {
        return Ok(LineageMatch { status: PageStatus::Duplicated, upstream_parent: Some(newest.clone()) });
    }
    let parent = older.iter().find(|rev| upstream.contains(&rev.key())).cloned();
    Ok(LineageMatch { status: PageStatus::Changed, upstream_parent: parent })
}
