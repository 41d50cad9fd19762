//! Page lineage crawl: fork and upstream histories to [`PageRecord`]s.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use forkdiff_core::lineage::{match_lineage, PageRecord, PageStatus};
use forkdiff_core::stats::{MonthWindow, YearMonth};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ViewRow;
use crate::mediawiki::{Fetched, MediaWikiClient};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlManifest {
    pub titles: Vec<String>,
    /// Newest fetch time of any response the crawl used.
    pub fetched_at: Option<DateTime<Utc>>,
    pub counts: BTreeMap<PageStatus, usize>,
    /// Changed pages whose histories share no revision with upstream.
    pub needs_review: Vec<String>,
    /// Missing pages whose fork API refused access rather than reporting
    /// them absent.
    pub blocked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlOutput {
    pub records: Vec<PageRecord>,
    pub manifest: CrawlManifest,
}

enum PageOutcome {
    Record(PageRecord),
    Blocked(PageRecord),
}

fn crawl_page(upstream: &MediaWikiClient, fork: &MediaWikiClient, title: &str) -> Result<PageOutcome> {
    let (last, fork_text) = match fork.fetch_last_revision(title)? {
        Fetched::Found(found) => found,
        Fetched::Missing => return Ok(PageOutcome::Record(PageRecord::missing(title))),
        Fetched::Blocked => return Ok(PageOutcome::Blocked(PageRecord::missing(title))),
    };
    let mut fork_history = fork.fetch_history(title, None)?;
    if fork_history.first().map(|r| r.rev_id) != Some(last.rev_id) {
        fork_history.insert(0, last.clone());
    }
    let upstream_history = upstream.fetch_history(title, None)?;
    let lineage = match_lineage(&fork_history, &upstream_history).map_err(|e| Error::Data(format!("{title}: {e}")))?;

    let record = match lineage.status {
        PageStatus::Duplicated => PageRecord {
            title: title.into(),
            status: PageStatus::Duplicated,
            fork_last_rev: Some(last),
            upstream_parent_rev: lineage.upstream_parent,
            fork_text: None,
            upstream_text: None,
        },
        _ => {
            let upstream_text = match &lineage.upstream_parent {
                Some(parent) => upstream.fetch_revision_text(parent.rev_id)?.found(),
                None => None,
            };
            PageRecord {
                title: title.into(),
                status: PageStatus::Changed,
                fork_last_rev: Some(last),
                upstream_parent_rev: lineage.upstream_parent,
                fork_text: Some(fork_text),
                upstream_text,
            }
        }
    };
    Ok(PageOutcome::Record(record))
}

/// Classify every title. Pages are fetched on `workers` threads; records come
/// back in title order.
pub fn crawl(
    upstream: &MediaWikiClient,
    fork: &MediaWikiClient,
    titles: &[String],
    workers: usize,
) -> Result<CrawlOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Data(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<PageOutcome> =
        pool.install(|| titles.par_iter().map(|t| crawl_page(upstream, fork, t)).collect::<Result<_>>())?;

    let mut counts: BTreeMap<PageStatus, usize> = PageStatus::ALL.iter().map(|&s| (s, 0)).collect();
    let mut records = Vec::with_capacity(outcomes.len());
    let (mut needs_review, mut blocked) = (Vec::new(), Vec::new());
    for outcome in outcomes {
        let record = match outcome {
            PageOutcome::Record(r) => r,
            PageOutcome::Blocked(r) => {
                blocked.push(r.title.clone());
                r
            }
        };
        if record.status == PageStatus::Changed && record.upstream_parent_rev.is_none() {
            needs_review.push(record.title.clone());
        }
        *counts.entry(record.status).or_default() += 1;
        records.push(record);
    }
    let fetched_at = match (upstream.latest_fetch(), fork.latest_fetch()) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    Ok(CrawlOutput {
        records,
        manifest: CrawlManifest { titles: titles.to_vec(), fetched_at, counts, needs_review, blocked },
    })
}

/// Monthly views of every title over `window`, in title then month order.
pub fn fetch_views(client: &MediaWikiClient, titles: &[String], window: MonthWindow) -> Result<Vec<ViewRow>> {
    let months: Vec<YearMonth> = window.months().collect();
    let mut rows = Vec::new();
    for title in titles {
        for &month in &months {
            let count = client.fetch_monthly_views(title, month)?;
            rows.push(ViewRow { title: title.clone(), month, count });
        }
    }
    Ok(rows)
}
