//! Report bundle rendering. Every function here is pure: same inputs, same
//! bytes.

use std::collections::BTreeMap;

use forkdiff_core::analytics::{EntityDeltas, GeoRate, TemporalHeatmap, TopChanges};
use forkdiff_core::lineage::{PageRecord, PageStatus};
use forkdiff_core::taxonomy::{emit_taxonomy, FitRate, Taxonomy};
use serde::{Deserialize, Serialize};

use crate::crawl::CrawlManifest;
use crate::error::Result;
use crate::io::{csv_bytes, fmt_f64, sha256_hex};
use crate::stages::{Analysis, DiffReport, StatsReport};

const WEEKDAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

pub const TEMPORAL_COLUMNS: &[&str] = &["series", "weekday", "hour", "mean_edits", "edits"];
pub const GEO_COLUMNS: &[&str] = &["countries", "status", "pages", "group_pages", "rate"];
pub const CATEGORY_COLUMNS: &[&str] = &["direction", "rank", "category", "pages", "pct"];
pub const REFERENCE_COLUMNS: &[&str] = &["direction", "rank", "domain", "pages", "pct"];
pub const ENTITY_COLUMNS: &[&str] = &["direction", "rank", "lemma", "label", "pages", "pct"];
pub const TAXONOMY_COLUMNS: &[&str] = &[
    "id",
    "name",
    "description",
    "size",
    "size_fraction",
    "ecfr_before",
    "ecfr_before_pm",
    "ecfr_after",
    "ecfr_after_pm",
];
pub const STATS_COLUMNS: &[&str] = &["group", "metric", "pages", "mean", "ci_low", "ci_high", "std_error"];

/// 7 x 24 rows per series, Monday first.
pub fn temporal_csv(heatmaps: &[TemporalHeatmap]) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for h in heatmaps {
        for (d, day) in WEEKDAYS.iter().enumerate() {
            for hour in 0..24 {
                rows.push(vec![
                    h.label.clone(),
                    day.to_string(),
                    hour.to_string(),
                    fmt_f64(h.cells[d][hour]),
                    h.counts[d][hour].to_string(),
                ]);
            }
        }
    }
    csv_bytes(TEMPORAL_COLUMNS, rows)
}

pub fn geo_csv(rates: &[GeoRate]) -> Result<Vec<u8>> {
    csv_bytes(
        GEO_COLUMNS,
        rates.iter().map(|r| {
            vec![
                r.countries.clone(),
                r.status.to_string(),
                r.pages.to_string(),
                r.group_pages.to_string(),
                fmt_f64(r.rate),
            ]
        }),
    )
}

fn ranked_rows(top: &TopChanges) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (direction, list) in [("added", &top.added), ("removed", &top.removed)] {
        for (i, r) in list.iter().enumerate() {
            rows.push(vec![direction.into(), (i + 1).to_string(), r.key.clone(), r.count.to_string(), fmt_f64(r.pct)]);
        }
    }
    rows
}

pub fn categories_csv(top: &TopChanges) -> Result<Vec<u8>> {
    csv_bytes(CATEGORY_COLUMNS, ranked_rows(top))
}

pub fn references_csv(top: &TopChanges) -> Result<Vec<u8>> {
    csv_bytes(REFERENCE_COLUMNS, ranked_rows(top))
}

pub fn entities_csv(deltas: &EntityDeltas) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (direction, list) in [("deleted", &deltas.deleted), ("added", &deltas.added)] {
        for (i, e) in list.iter().enumerate() {
            rows.push(vec![
                direction.into(),
                (i + 1).to_string(),
                e.lemma.clone(),
                e.label.as_str().into(),
                e.count.to_string(),
                fmt_f64(e.pct),
            ]);
        }
    }
    csv_bytes(ENTITY_COLUMNS, rows)
}

pub fn stats_csv(stats: &StatsReport) -> Result<Vec<u8>> {
    csv_bytes(
        STATS_COLUMNS,
        stats.rows.iter().map(|r| {
            vec![
                r.group.to_string(),
                r.metric.as_str().into(),
                r.pages.to_string(),
                fmt_f64(r.mean),
                fmt_f64(r.ci_low),
                fmt_f64(r.ci_high),
                fmt_f64(r.std_error),
            ]
        }),
    )
}

fn rate_cells(rate: &Option<FitRate>) -> [String; 2] {
    match rate {
        Some(r) => [fmt_f64(r.rate), fmt_f64(r.plus_minus)],
        None => [String::new(), String::new()],
    }
}

/// Rows by size with "Other changes" last; ECFR columns are fractions.
pub fn taxonomy_csv(taxonomy: &Taxonomy) -> Result<Vec<u8>> {
    let by_id: BTreeMap<usize, _> = taxonomy.clusters.iter().map(|c| (c.id, c)).collect();
    let rows = emit_taxonomy(taxonomy).into_iter().map(|row| {
        let c = by_id[&row.id];
        let [before, before_pm] = rate_cells(&c.ecfr_before);
        let [after, after_pm] = rate_cells(&c.ecfr_after);
        vec![
            row.id.to_string(),
            row.name,
            row.description,
            row.size.to_string(),
            fmt_f64(row.size_fraction),
            before,
            before_pm,
            after,
            after_pm,
        ]
    });
    csv_bytes(TAXONOMY_COLUMNS, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomySummary {
    pub clusters: usize,
    pub edits: usize,
    pub overall_ecfr_before: Option<f64>,
    pub overall_ecfr_after: Option<f64>,
}

/// Headline rates of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pages: usize,
    pub counts: BTreeMap<PageStatus, usize>,
    pub fractions: BTreeMap<PageStatus, f64>,
    pub needs_review: usize,
    pub blocked: usize,
    pub diffed_pages: usize,
    pub skipped_pages: usize,
    pub views_share: BTreeMap<PageStatus, f64>,
    pub office_hours_share: BTreeMap<String, Option<f64>>,
    pub taxonomy: Option<TaxonomySummary>,
}

pub fn summarize(
    records: &[PageRecord],
    crawl: &CrawlManifest,
    diff: &DiffReport,
    stats: &StatsReport,
    analysis: &Analysis,
    taxonomy: Option<&Taxonomy>,
) -> Summary {
    let mut counts: BTreeMap<PageStatus, usize> = PageStatus::ALL.iter().map(|&s| (s, 0)).collect();
    for r in records {
        *counts.entry(r.status).or_default() += 1;
    }
    let n = records.len();
    let fractions = counts.iter().map(|(&s, &c)| (s, if n == 0 { 0.0 } else { c as f64 / n as f64 })).collect();
    Summary {
        pages: n,
        counts,
        fractions,
        needs_review: crawl.needs_review.len(),
        blocked: crawl.blocked.len(),
        diffed_pages: diff.diffed,
        skipped_pages: diff.skipped.len(),
        views_share: stats.views_share.clone(),
        office_hours_share: analysis.office_hours_share.clone(),
        taxonomy: taxonomy.map(|t| TaxonomySummary {
            clusters: t.clusters.len(),
            edits: t.edits.len(),
            overall_ecfr_before: t.overall_ecfr_before,
            overall_ecfr_after: t.overall_ecfr_after,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
    pub description: String,
    /// CSV header, empty for JSON files.
    pub columns: Vec<String>,
}

/// `MANIFEST.json`: what each file of the bundle holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub generator: String,
    pub config_hash: String,
    pub files: Vec<BundleFile>,
}

pub fn describe(path: &str) -> (&'static str, &'static [&'static str]) {
    match path {
        "temporal.csv" => ("mean edits per weekday and UTC hour, bots excluded", TEMPORAL_COLUMNS),
        "geo.csv" => ("share of pages in each status per country set", GEO_COLUMNS),
        "categories.csv" => ("most added and removed categories on changed pages", CATEGORY_COLUMNS),
        "references.csv" => ("most added and removed reference domains on changed pages", REFERENCE_COLUMNS),
        "entities.csv" => ("most deleted and added named entities on text-changed pages", ENTITY_COLUMNS),
        "stats.csv" => ("bootstrap estimates per status group and metric", STATS_COLUMNS),
        "stats.json" => ("relevance statistics with bootstrap settings and views share", &[]),
        "taxonomy.csv" => ("taxonomy of changes with fit rates before and after correction", TAXONOMY_COLUMNS),
        "taxonomy.json" => ("full taxonomy with per-edit assignments and diagnostics", &[]),
        "summary.json" => ("headline rates of the run", &[]),
        _ => ("", &[]),
    }
}

/// Files are listed in path order.
pub fn bundle_manifest(config_hash: &str, files: &BTreeMap<String, Vec<u8>>) -> BundleManifest {
    BundleManifest {
        generator: concat!("forkdiff ", env!("CARGO_PKG_VERSION")).into(),
        config_hash: config_hash.into(),
        files: files
            .iter()
            .map(|(path, bytes)| {
                let (description, columns) = describe(path);
                BundleFile {
                    path: path.clone(),
                    sha256: sha256_hex(bytes),
                    bytes: bytes.len(),
                    description: description.into(),
                    columns: columns.iter().map(|c| c.to_string()).collect(),
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use forkdiff_core::analytics::{temporal_heatmap, BotFilter, RankedCount};

    #[test]
    fn temporal_has_168_rows_per_series() {
        let h = temporal_heatmap("fork", &[], &BotFilter::enabled());
        let text = String::from_utf8(temporal_csv(&[h]).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 168);
        assert_eq!(lines[0], "series,weekday,hour,mean_edits,edits");
        assert_eq!(lines[1], "fork,Mon,0,0.000000,0");
    }

    #[test]
    fn ranked_rows_number_each_direction() {
        let top = TopChanges {
            added: vec![RankedCount { key: "Медицина".into(), count: 2, pct: 50.0 }],
            removed: vec![
                RankedCount { key: "a".into(), count: 3, pct: 75.0 },
                RankedCount { key: "b".into(), count: 1, pct: 25.0 },
            ],
            denominator: 4,
            changed_pages: 4,
            text_changed_pages: 4,
            unique_added: 1,
            unique_removed: 2,
        };
        let text = String::from_utf8(categories_csv(&top).unwrap()).unwrap();
        assert_eq!(
            text,
            "direction,rank,category,pages,pct\nadded,1,Медицина,2,50.000000\nremoved,1,a,3,75.000000\nremoved,2,b,1,25.000000\n"
        );
    }

    #[test]
    fn manifest_lists_files_with_hashes() {
        let files = BTreeMap::from([("summary.json".to_string(), b"{}".to_vec())]);
        let m = bundle_manifest("abc", &files);
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files[0].sha256, sha256_hex(b"{}"));
        assert_eq!(m.files[0].description, "headline rates of the run");
    }
}
