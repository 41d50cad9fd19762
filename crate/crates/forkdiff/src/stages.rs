//! Stage computations over loaded artifacts. File handling lives in
//! [`crate::pipeline`] and the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use forkdiff_core::analytics::{
    entity_deltas, geo_group_rates, office_hours_share, temporal_heatmap, top_category_changes, top_reference_changes,
    BotFilter, EntityDeltas, EntityRecognizer, GeoAnnotation, GeoRate, OfficeHours, TemporalHeatmap, TopChanges,
};
use forkdiff_core::diff::{diff_pages, ContentDiff, DiffError, SimilarityThreshold};
use forkdiff_core::lineage::{PageRecord, PageStatus};
use forkdiff_core::stats::{
    compute_metrics, group_estimates, views_share, BootstrapConfig, Metric, MonthWindow, RevisionLogEntry, YearMonth,
};
use forkdiff_core::taxonomy::PromptTemplates;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn statuses(records: &[PageRecord]) -> BTreeMap<String, PageStatus> {
    records.iter().map(|r| (r.title.clone(), r.status)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPage {
    pub title: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    /// Changed pages that produced a diff.
    pub diffed: usize,
    /// Diffs with no recorded change at all.
    pub empty: usize,
    /// Changed pages that could not be diffed.
    pub skipped: Vec<SkippedPage>,
}

/// Diff every changed record, in input order.
pub fn run_diff(records: &[PageRecord], threshold: SimilarityThreshold) -> (Vec<ContentDiff>, DiffReport) {
    let results: Vec<std::result::Result<ContentDiff, DiffError>> =
        records.par_iter().filter(|r| r.status == PageStatus::Changed).map(|r| diff_pages(r, threshold)).collect();
    let mut diffs = Vec::new();
    let mut report = DiffReport::default();
    for r in results {
        match r {
            Ok(d) => {
                report.empty += usize::from(d.is_empty());
                diffs.push(d);
            }
            Err(DiffError::MissingText { title }) => {
                report.skipped.push(SkippedPage { title, reason: "no upstream parent text".into() });
            }
            Err(e) => report.skipped.push(SkippedPage { title: String::new(), reason: e.to_string() }),
        }
    }
    report.diffed = diffs.len();
    (diffs, report)
}

/// One cell of the (group x metric) table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub group: PageStatus,
    pub metric: Metric,
    pub pages: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub window_start: YearMonth,
    pub window_end: YearMonth,
    pub bootstrap: BootstrapConfig,
    pub rows: Vec<StatsRow>,
    pub group_sizes: BTreeMap<PageStatus, usize>,
    pub empty_groups: Vec<PageStatus>,
    /// Share of total monthly views per group.
    pub views_share: BTreeMap<PageStatus, f64>,
    pub total_monthly_views: f64,
}

pub fn run_stats(
    records: &[PageRecord],
    revlog: &[RevisionLogEntry],
    views: &BTreeMap<String, BTreeMap<YearMonth, u64>>,
    window: MonthWindow,
    bootstrap: &BootstrapConfig,
) -> Result<StatsReport> {
    let statuses = statuses(records);
    let mut logs: BTreeMap<&str, Vec<&RevisionLogEntry>> = BTreeMap::new();
    for entry in revlog {
        logs.entry(entry.title.as_str()).or_default().push(entry);
    }
    let no_views = BTreeMap::new();
    let metrics: Vec<_> = statuses
        .keys()
        .map(|title| {
            let log = logs.get(title.as_str()).map(Vec::as_slice).unwrap_or_default();
            compute_metrics(title, log.iter().copied(), views.get(title).unwrap_or(&no_views), window)
        })
        .collect();
    let groups = group_estimates(&metrics, &statuses, bootstrap).map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = Vec::new();
    for (group, per_metric) in &groups.estimates {
        for (metric, e) in per_metric {
            rows.push(StatsRow {
                group: *group,
                metric: *metric,
                pages: groups.group_sizes.get(group).copied().unwrap_or(0),
                mean: e.mean,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                std_error: e.std_error,
            });
        }
    }
    let share = views_share(&metrics, &statuses);
    Ok(StatsReport {
        window_start: window.start,
        window_end: window.end,
        bootstrap: *bootstrap,
        rows,
        group_sizes: groups.group_sizes,
        empty_groups: groups.empty_groups,
        views_share: share.shares,
        total_monthly_views: share.total_views,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub heatmaps: Vec<TemporalHeatmap>,
    pub office_hours: OfficeHours,
    /// `None` for a series without edits.
    pub office_hours_share: BTreeMap<String, Option<f64>>,
    pub geo: Vec<GeoRate>,
    pub categories: TopChanges,
    pub references: TopChanges,
    pub entities: EntityDeltas,
}

pub struct AnalyzeInputs<'a> {
    pub records: &'a [PageRecord],
    pub diffs: &'a [ContentDiff],
    pub revlog_upstream: &'a [RevisionLogEntry],
    pub revlog_fork: &'a [RevisionLogEntry],
    pub geo: &'a [GeoAnnotation],
    pub recognizer: &'a dyn EntityRecognizer,
    pub bots: BotFilter,
    pub office_hours: OfficeHours,
    pub top_k: usize,
}

pub const UPSTREAM_SERIES: &str = "upstream";
pub const FORK_SERIES: &str = "fork";

pub fn run_analyze(inputs: &AnalyzeInputs<'_>) -> Result<Analysis> {
    let data = |e: forkdiff_core::analytics::AnalyticsError| Error::Data(e.to_string());
    let heatmaps = vec![
        temporal_heatmap(UPSTREAM_SERIES, inputs.revlog_upstream, &inputs.bots),
        temporal_heatmap(FORK_SERIES, inputs.revlog_fork, &inputs.bots),
    ];
    let office_hours_share =
        heatmaps.iter().map(|h| (h.label.clone(), office_hours_share(h, &inputs.office_hours).ok())).collect();
    Ok(Analysis {
        office_hours: inputs.office_hours,
        office_hours_share,
        geo: geo_group_rates(&statuses(inputs.records), inputs.geo).map_err(data)?,
        categories: top_category_changes(inputs.diffs, inputs.top_k).map_err(data)?,
        references: top_reference_changes(inputs.diffs, inputs.top_k).map_err(data)?,
        entities: entity_deltas(inputs.diffs, inputs.recognizer, inputs.top_k).map_err(data)?,
        heatmaps,
    })
}

/// Prompt templates from `dir`, falling back to the built-in text for each
/// missing file. File contents are used byte for byte.
pub fn load_templates(dir: Option<&Path>) -> Result<PromptTemplates> {
    let mut t = PromptTemplates::default();
    if let Some(dir) = dir {
        for (file, slot) in [
            ("summary.txt", &mut t.summary),
            ("fit.txt", &mut t.fit),
            ("reassign.txt", &mut t.reassign),
            ("naming.txt", &mut t.naming),
        ] {
            let path = dir.join(file);
            if path.is_file() {
                *slot = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    t.validate().map_err(|e| Error::Config(format!("prompt templates: {e}")))?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use forkdiff_core::analytics::Gazetteer;
    use forkdiff_core::lineage::RevisionMeta;

    fn meta(rev_id: u64) -> RevisionMeta {
        RevisionMeta {
            rev_id,
            parent_id: 0,
            timestamp: Utc.with_ymd_and_hms(2023, 8, 1, 0, 0, 0).unwrap(),
            user: "u".into(),
            is_bot: false,
            comment: String::new(),
        }
    }

    fn changed(title: &str, base: Option<&str>, fork: &str) -> PageRecord {
        PageRecord {
            title: title.into(),
            status: PageStatus::Changed,
            fork_last_rev: Some(meta(2)),
            upstream_parent_rev: base.map(|_| meta(1)),
            fork_text: Some(fork.into()),
            upstream_text: base.map(str::to_string),
        }
    }

    #[test]
    fn diff_skips_pages_without_parent_text() {
        let records = vec![
            changed("A", Some("One sentence here."), "One sentence here.\n\n[[Категория:Новое]]"),
            PageRecord::missing("B"),
            changed("C", None, "x"),
        ];
        let (diffs, report) = run_diff(&records, SimilarityThreshold::default());
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].categories_added.iter().collect::<Vec<_>>(), ["Новое"]);
        assert_eq!(report.diffed, 1);
        assert_eq!(report.skipped, vec![SkippedPage { title: "C".into(), reason: "no upstream parent text".into() }]);
    }

    #[test]
    fn stats_table_covers_present_groups() {
        let records = vec![changed("A", Some("a"), "b"), PageRecord::missing("B"), PageRecord::missing("C")];
        let views = BTreeMap::from([
            ("A".to_string(), BTreeMap::from([("2023-01".parse().unwrap(), 30)])),
            ("B".to_string(), BTreeMap::from([("2023-01".parse().unwrap(), 90)])),
        ]);
        let window = MonthWindow::new("2023-01".parse().unwrap(), "2023-03".parse().unwrap()).unwrap();
        let cfg = BootstrapConfig { n_resamples: 50, sample_size: 10, confidence: 0.95, seed: 1 };
        let report = run_stats(&records, &[], &views, window, &cfg).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert_eq!(report.empty_groups, vec![PageStatus::Duplicated]);
        assert_eq!(report.total_monthly_views, 40.0);
        assert_eq!(report.views_share[&PageStatus::Changed], 0.25);
    }

    #[test]
    fn analyze_on_empty_diffs_gives_empty_tables() {
        let inputs = AnalyzeInputs {
            records: &[],
            diffs: &[],
            revlog_upstream: &[],
            revlog_fork: &[],
            geo: &[],
            recognizer: &Gazetteer::new(),
            bots: BotFilter::enabled(),
            office_hours: OfficeHours::default(),
            top_k: 5,
        };
        let a = run_analyze(&inputs).unwrap();
        assert!(a.categories.added.is_empty() && a.references.removed.is_empty());
        assert_eq!(a.categories.changed_pages, 0);
        assert_eq!(a.office_hours_share[FORK_SERIES], None);
    }

    #[test]
    fn template_overrides_are_read_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("fit.txt"), "Is <{EDIT_SUMMARY}> in ~{CLUSTER_DETAILS}~?\n").unwrap();
        let t = load_templates(Some(dir.path())).unwrap();
        assert_eq!(t.fit, "Is <{EDIT_SUMMARY}> in ~{CLUSTER_DETAILS}~?\n");
        assert_eq!(t.summary, PromptTemplates::default().summary);
        fs::write(dir.path().join("fit.txt"), "{BOGUS}").unwrap();
        assert!(matches!(load_templates(Some(dir.path())), Err(Error::Config(_))));
    }
}
