//! Descriptive aggregates over revision logs and content diffs.
//!
//! Every aggregate is built from an accumulator with an associative,
//! commutative `merge`, so partial results computed on shards combine to the
//! same output as one sequential pass.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::{Datelike, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::diff::ContentDiff;
use crate::lineage::PageStatus;
use crate::stats::RevisionLogEntry;

// ---------------------------------------------------------------------------
// Temporal heatmap

/// Username-based bot filter: names ending in "bot" or "бот" (any case) and
/// any explicitly listed name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotFilter {
    pub enabled: bool,
    pub extra: BTreeSet<String>,
}

impl BotFilter {
    pub fn enabled() -> Self {
        BotFilter { enabled: true, extra: BTreeSet::new() }
    }

    pub fn with_names<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.extra.extend(names.into_iter().map(|n| n.as_ref().trim().to_lowercase()));
        self
    }

    pub fn is_bot(&self, user: &str) -> bool {
        let lower = user.trim().to_lowercase();
        lower.ends_with("bot") || lower.ends_with("бот") || self.extra.contains(&lower)
    }

    pub fn excludes(&self, user: &str) -> bool {
        self.enabled && self.is_bot(user)
    }
}

/// Mean edits per (weekday, UTC hour) slot. Row 0 is Monday.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalHeatmap {
    pub label: String,
    pub cells: [[f64; 24]; 7],
    pub counts: [[u64; 24]; 7],
    /// How many times each weekday occurs in the covered date range.
    pub slot_occurrences: [u64; 7],
    pub first_day: Option<NaiveDate>,
    pub last_day: Option<NaiveDate>,
}

impl TemporalHeatmap {
    pub fn total_edits(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Accumulates edit counts per slot together with the date span seen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EditClock {
    counts: [[u64; 24]; 7],
    first_day: Option<NaiveDate>,
    last_day: Option<NaiveDate>,
}

impl EditClock {
    pub fn add(&mut self, entry: &RevisionLogEntry, filter: &BotFilter) {
        if filter.excludes(&entry.user) {
            return;
        }
        let ts = entry.timestamp;
        let day = ts.weekday().num_days_from_monday() as usize;
        self.counts[day][ts.hour() as usize] += 1;
        let date = ts.date_naive();
        self.first_day = Some(self.first_day.map_or(date, |d| d.min(date)));
        self.last_day = Some(self.last_day.map_or(date, |d| d.max(date)));
    }

    pub fn merge(&mut self, other: &EditClock) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
        self.first_day = match (self.first_day, other.first_day) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.last_day = match (self.last_day, other.last_day) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    /// Divide counts by the number of occurrences of each weekday between the
    /// first and last edit day, inclusive.
    pub fn finish(&self, label: &str) -> TemporalHeatmap {
        let mut occurrences = [0u64; 7];
        if let (Some(first), Some(last)) = (self.first_day, self.last_day) {
            for day in first.iter_days().take_while(|d| *d <= last) {
                occurrences[day.weekday().num_days_from_monday() as usize] += 1;
            }
        }
        let mut cells = [[0.0; 24]; 7];
        for (d, row) in cells.iter_mut().enumerate() {
            for (h, cell) in row.iter_mut().enumerate() {
                if occurrences[d] > 0 {
                    *cell = self.counts[d][h] as f64 / occurrences[d] as f64;
                }
            }
        }
        TemporalHeatmap {
            label: label.into(),
            cells,
            counts: self.counts,
            slot_occurrences: occurrences,
            first_day: self.first_day,
            last_day: self.last_day,
        }
    }
}

pub fn temporal_heatmap<'a>(
    label: &str,
    log: impl IntoIterator<Item = &'a RevisionLogEntry>,
    filter: &BotFilter,
) -> TemporalHeatmap {
    let mut clock = EditClock::default();
    for entry in log {
        clock.add(entry, filter);
    }
    clock.finish(label)
}

/// Weekday hours counted as office hours, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfficeHours {
    pub first_hour: u32,
    pub last_hour: u32,
}

impl Default for OfficeHours {
    fn default() -> Self {
        OfficeHours { first_hour: 8, last_hour: 17 }
    }
}

impl OfficeHours {
    pub fn contains(&self, weekday: usize, hour: usize) -> bool {
        weekday < 5 && (self.first_hour as usize..=self.last_hour as usize).contains(&hour)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalyticsError {
    /// Share of an empty heatmap is undefined.
    ZeroTotal,
    InvalidCountry {
        title: String,
        code: String,
    },
    DuplicateGeoTitle(String),
    InvalidK,
}

impl fmt::Display for AnalyticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticsError::ZeroTotal => f.write_str("heatmap has no edits; office-hours share is undefined"),
            AnalyticsError::InvalidCountry { title, code } => {
                write!(f, "`{code}` on `{title}` is not an ISO 3166-1 alpha-2 code")
            }
            AnalyticsError::DuplicateGeoTitle(t) => write!(f, "geo annotation for `{t}` appears twice"),
            AnalyticsError::InvalidK => f.write_str("k must be at least 1"),
        }
    }
}

impl core::error::Error for AnalyticsError {}

/// Fraction of edits made on weekdays within office hours.
pub fn office_hours_share(heatmap: &TemporalHeatmap, hours: &OfficeHours) -> Result<f64, AnalyticsError> {
    let total = heatmap.total_edits();
    if total == 0 {
        return Err(AnalyticsError::ZeroTotal);
    }
    let mut office = 0u64;
    for (d, row) in heatmap.counts.iter().enumerate() {
        for (h, count) in row.iter().enumerate() {
            if hours.contains(d, h) {
                office += count;
            }
        }
    }
    Ok(office as f64 / total as f64)
}

// ---------------------------------------------------------------------------
// Geography

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoAnnotation {
    pub title: String,
    pub countries: BTreeSet<String>,
}

impl GeoAnnotation {
    /// Validate and uppercase alpha-2 codes.
    pub fn new<I, S>(title: &str, codes: I) -> Result<Self, AnalyticsError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut countries = BTreeSet::new();
        for code in codes {
            let code = code.as_ref().trim();
            if code.is_empty() {
                continue;
            }
            if code.len() != 2 || !code.bytes().all(|b| b.is_ascii_alphabetic()) {
                return Err(AnalyticsError::InvalidCountry { title: title.into(), code: code.into() });
            }
            countries.insert(code.to_ascii_uppercase());
        }
        Ok(GeoAnnotation { title: title.into(), countries })
    }

    /// Country-set key, codes sorted and joined with `+`.
    pub fn key(&self) -> String {
        self.countries.iter().map(String::as_str).collect::<Vec<_>>().join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRate {
    pub countries: String,
    pub status: PageStatus,
    pub pages: u64,
    pub group_pages: u64,
    pub rate: f64,
}

/// For every country-set key, the share of its pages in each status.
///
/// Only pages with a non-empty country set and a known status count. Rows
/// are ordered by key, then status; every key lists all three statuses.
pub fn geo_group_rates(
    statuses: &BTreeMap<String, PageStatus>,
    geo: &[GeoAnnotation],
) -> Result<Vec<GeoRate>, AnalyticsError> {
    let mut seen = BTreeSet::new();
    let mut counts: BTreeMap<String, BTreeMap<PageStatus, u64>> = BTreeMap::new();
    for g in geo {
        if !seen.insert(g.title.as_str()) {
            return Err(AnalyticsError::DuplicateGeoTitle(g.title.clone()));
        }
        if g.countries.is_empty() {
            continue;
        }
        if let Some(status) = statuses.get(&g.title) {
            *counts.entry(g.key()).or_default().entry(*status).or_default() += 1;
        }
    }
    let mut rows = Vec::new();
    for (key, per_status) in counts {
        let total: u64 = per_status.values().sum();
        for status in PageStatus::ALL {
            let pages = per_status.get(&status).copied().unwrap_or(0);
            rows.push(GeoRate {
                countries: key.clone(),
                status,
                pages,
                group_pages: total,
                rate: pages as f64 / total as f64,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Added / removed element rankings

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCount {
    pub key: String,
    pub count: u64,
    /// Percentage of `denominator` pages.
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopChanges {
    pub added: Vec<RankedCount>,
    pub removed: Vec<RankedCount>,
    /// Pages used as the percentage base.
    pub denominator: u64,
    /// Changed pages with any recorded edit.
    pub changed_pages: u64,
    /// Changed pages with a sentence-level edit.
    pub text_changed_pages: u64,
    pub unique_added: usize,
    pub unique_removed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    ChangedPages,
    TextChangedPages,
}

/// Per-page deduplicated counts of added and removed keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeltaCounter {
    added: BTreeMap<String, u64>,
    removed: BTreeMap<String, u64>,
    changed_pages: u64,
    text_changed_pages: u64,
}

impl DeltaCounter {
    pub fn add_page<'a>(
        &mut self,
        diff: &ContentDiff,
        added: impl IntoIterator<Item = &'a str>,
        removed: impl IntoIterator<Item = &'a str>,
    ) {
        if !diff.is_empty() {
            self.changed_pages += 1;
        }
        if diff.has_text_change() {
            self.text_changed_pages += 1;
        }
        for key in added.into_iter().collect::<BTreeSet<_>>() {
            *self.added.entry(key.to_string()).or_default() += 1;
        }
        for key in removed.into_iter().collect::<BTreeSet<_>>() {
            *self.removed.entry(key.to_string()).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &DeltaCounter) {
        for (k, v) in &other.added {
            *self.added.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.removed {
            *self.removed.entry(k.clone()).or_default() += v;
        }
        self.changed_pages += other.changed_pages;
        self.text_changed_pages += other.text_changed_pages;
    }

    pub fn top(&self, k: usize, denominator: Denominator) -> TopChanges {
        let base = match denominator {
            Denominator::ChangedPages => self.changed_pages,
            Denominator::TextChangedPages => self.text_changed_pages,
        };
        TopChanges {
            added: rank(&self.added, k, base),
            removed: rank(&self.removed, k, base),
            denominator: base,
            changed_pages: self.changed_pages,
            text_changed_pages: self.text_changed_pages,
            unique_added: self.added.len(),
            unique_removed: self.removed.len(),
        }
    }
}

fn percent(count: u64, base: u64) -> f64 {
    if base == 0 {
        0.0
    } else {
        count as f64 * 100.0 / base as f64
    }
}

/// Highest counts first; equal counts in key order.
fn rank(counts: &BTreeMap<String, u64>, k: usize, base: u64) -> Vec<RankedCount> {
    let mut rows: Vec<(&String, u64)> = counts.iter().map(|(key, c)| (key, *c)).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    rows.into_iter()
        .take(k)
        .map(|(key, count)| RankedCount { key: key.clone(), count, pct: percent(count, base) })
        .collect()
}

pub fn count_categories<'a>(diffs: impl IntoIterator<Item = &'a ContentDiff>) -> DeltaCounter {
    let mut counter = DeltaCounter::default();
    for d in diffs {
        counter.add_page(
            d,
            d.categories_added.iter().map(String::as_str),
            d.categories_removed.iter().map(String::as_str),
        );
    }
    counter
}

pub fn count_references<'a>(diffs: impl IntoIterator<Item = &'a ContentDiff>) -> DeltaCounter {
    let mut counter = DeltaCounter::default();
    for d in diffs {
        counter.add_page(
            d,
            d.references_added.keys().map(String::as_str),
            d.references_removed.keys().map(String::as_str),
        );
    }
    counter
}

/// Top `k` added and removed categories; percentages over changed pages.
pub fn top_category_changes<'a>(
    diffs: impl IntoIterator<Item = &'a ContentDiff>,
    k: usize,
) -> Result<TopChanges, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidK);
    }
    Ok(count_categories(diffs).top(k, Denominator::ChangedPages))
}

/// Top `k` added and removed reference domains, counted once per page.
pub fn top_reference_changes<'a>(
    diffs: impl IntoIterator<Item = &'a ContentDiff>,
    k: usize,
) -> Result<TopChanges, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidK);
    }
    Ok(count_references(diffs).top(k, Denominator::ChangedPages))
}

// ---------------------------------------------------------------------------
// Named entities

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityLabel {
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "PER")]
    Per,
    #[serde(rename = "MISC")]
    Misc,
}

impl EntityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityLabel::Loc => "LOC",
            EntityLabel::Org => "ORG",
            EntityLabel::Per => "PER",
            EntityLabel::Misc => "MISC",
        }
    }
}

impl core::str::FromStr for EntityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOC" => Ok(EntityLabel::Loc),
            "ORG" => Ok(EntityLabel::Org),
            "PER" => Ok(EntityLabel::Per),
            "MISC" => Ok(EntityLabel::Misc),
            other => Err(alloc::format!("unknown entity label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntity {
    pub surface: String,
    pub label: EntityLabel,
    pub lemma: String,
    #[serde(default)]
    pub start: usize,
    #[serde(default)]
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecognizerError(pub String);

impl fmt::Display for RecognizerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entity recognizer failed: {}", self.0)
    }
}

impl core::error::Error for RecognizerError {}

/// Named-entity recognizer. Must be deterministic for a fixed input.
pub trait EntityRecognizer {
    fn recognize(&self, text: &str) -> Result<Vec<NamedEntity>, RecognizerError>;
}

impl<R: EntityRecognizer + ?Sized> EntityRecognizer for &R {
    fn recognize(&self, text: &str) -> Result<Vec<NamedEntity>, RecognizerError> {
        (**self).recognize(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for GazetteerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gazetteer line {}: {}", self.line, self.message)
    }
}

impl core::error::Error for GazetteerError {}

/// Surface-form lookup table with a capitalised-token fallback.
///
/// Matching is case-sensitive, on whole word tokens, longest entry first.
/// Capitalised tokens not covered by an entry and not starting a sentence
/// are reported as MISC with the token itself as lemma.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    // first token -> (token sequence, lemma, label), longest sequences first
    by_first: BTreeMap<String, Vec<(Vec<String>, String, EntityLabel)>>,
    pub capitalized_fallback: bool,
}

impl Gazetteer {
    pub fn new() -> Self {
        Gazetteer { by_first: BTreeMap::new(), capitalized_fallback: true }
    }

    pub fn insert(&mut self, surface: &str, lemma: &str, label: EntityLabel) {
        let tokens: Vec<String> = tokenize(surface).into_iter().map(|t| t.text.to_string()).collect();
        let Some(first) = tokens.first().cloned() else { return };
        let slot = self.by_first.entry(first).or_default();
        slot.retain(|(t, _, _)| *t != tokens);
        slot.push((tokens, lemma.into(), label));
        slot.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    }

    /// Parse `surface<TAB>lemma<TAB>label` lines; blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, GazetteerError> {
        let mut g = Gazetteer::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [surface, lemma, label] = fields.as_slice() else {
                return Err(GazetteerError { line: i + 1, message: "expected three tab-separated fields".into() });
            };
            let label = label.parse().map_err(|message| GazetteerError { line: i + 1, message })?;
            if surface.trim().is_empty() || lemma.trim().is_empty() {
                return Err(GazetteerError { line: i + 1, message: "empty surface or lemma".into() });
            }
            g.insert(surface.trim(), lemma.trim(), label);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.by_first.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_first.is_empty()
    }
}

impl EntityRecognizer for Gazetteer {
    fn recognize(&self, text: &str) -> Result<Vec<NamedEntity>, RecognizerError> {
        let tokens = tokenize(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let matched = self.by_first.get(tokens[i].text).and_then(|candidates| {
                candidates.iter().find(|(seq, _, _)| {
                    i + seq.len() <= tokens.len() && seq.iter().zip(&tokens[i..]).all(|(s, t)| s == t.text)
                })
            });
            if let Some((seq, lemma, label)) = matched {
                let (start, end) = (tokens[i].start, tokens[i + seq.len() - 1].end);
                out.push(NamedEntity {
                    surface: text[start..end].into(),
                    label: *label,
                    lemma: lemma.clone(),
                    start,
                    end,
                });
                i += seq.len();
                continue;
            }
            let tok = &tokens[i];
            if self.capitalized_fallback
                && !tok.sentence_initial
                && tok.text.chars().count() > 1
                && tok.text.chars().next().is_some_and(char::is_uppercase)
            {
                out.push(NamedEntity {
                    surface: tok.text.into(),
                    label: EntityLabel::Misc,
                    lemma: tok.text.into(),
                    start: tok.start,
                    end: tok.end,
                });
            }
            i += 1;
        }
        Ok(out)
    }
}

struct Token<'a> {
    text: &'a str,
    start: usize,
    end: usize,
    sentence_initial: bool,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    let mut initial = true;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let next_is_word = iter.peek().is_some_and(|(_, n)| n.is_alphanumeric());
        let joiner = (c == '-' || c == '\'' || c == '’') && start.is_some() && next_is_word;
        if c.is_alphanumeric() || joiner {
            if start.is_none() {
                start = Some(i);
            }
        } else {
            if let Some(s) = start.take() {
                tokens.push(Token { text: &text[s..i], start: s, end: i, sentence_initial: initial });
                initial = false;
            }
            if matches!(c, '.' | '!' | '?' | '…' | '\n') {
                initial = true;
            } else if !(c.is_whitespace() || matches!(c, '"' | '«' | '»' | '„' | '“' | '(' | '\'')) {
                initial = false;
            }
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: &text[s..], start: s, end: text.len(), sentence_initial: initial });
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityCount {
    pub lemma: String,
    pub label: EntityLabel,
    pub count: u64,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDeltas {
    pub deleted: Vec<EntityCount>,
    pub added: Vec<EntityCount>,
    /// Pages with a sentence-level change; the percentage base.
    pub text_changed_pages: u64,
    pub changed_pages: u64,
    /// Pages skipped because the recognizer failed on them.
    pub failed_pages: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct LemmaTally {
    pages: u64,
    labels: BTreeMap<EntityLabel, u64>,
}

/// Per-page deduplicated entity counts on both sides of the diffs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityCounter {
    deleted: BTreeMap<String, LemmaTally>,
    added: BTreeMap<String, LemmaTally>,
    changed_pages: u64,
    text_changed_pages: u64,
    failed_pages: BTreeSet<String>,
}

impl EntityCounter {
    pub fn add_page<R: EntityRecognizer + ?Sized>(&mut self, diff: &ContentDiff, recognizer: &R) {
        if !diff.has_text_change() {
            if !diff.is_empty() {
                self.changed_pages += 1;
            }
            return;
        }
        let deleted_text = diff.deleted_text().collect::<Vec<_>>().join("\n");
        let added_text = diff.added_text().collect::<Vec<_>>().join("\n");
        let (deleted, added) = match (recognizer.recognize(&deleted_text), recognizer.recognize(&added_text)) {
            (Ok(d), Ok(a)) => (d, a),
            _ => {
                self.failed_pages.insert(diff.title.clone());
                return;
            }
        };
        self.changed_pages += 1;
        self.text_changed_pages += 1;
        tally_side(&mut self.deleted, deleted);
        tally_side(&mut self.added, added);
    }

    pub fn merge(&mut self, other: &EntityCounter) {
        for (mine, theirs) in [(&mut self.deleted, &other.deleted), (&mut self.added, &other.added)] {
            for (lemma, tally) in theirs {
                let t = mine.entry(lemma.clone()).or_default();
                t.pages += tally.pages;
                for (label, n) in &tally.labels {
                    *t.labels.entry(*label).or_default() += n;
                }
            }
        }
        self.changed_pages += other.changed_pages;
        self.text_changed_pages += other.text_changed_pages;
        self.failed_pages.extend(other.failed_pages.iter().cloned());
    }

    pub fn top(&self, k: usize) -> EntityDeltas {
        let base = self.text_changed_pages;
        EntityDeltas {
            deleted: rank_entities(&self.deleted, k, base),
            added: rank_entities(&self.added, k, base),
            text_changed_pages: base,
            changed_pages: self.changed_pages,
            failed_pages: self.failed_pages.iter().cloned().collect(),
        }
    }
}

fn tally_side(side: &mut BTreeMap<String, LemmaTally>, entities: Vec<NamedEntity>) {
    // first label seen for a lemma on this page wins
    let mut per_page: BTreeMap<String, EntityLabel> = BTreeMap::new();
    for e in entities {
        if !e.lemma.is_empty() {
            per_page.entry(e.lemma).or_insert(e.label);
        }
    }
    for (lemma, label) in per_page {
        let t = side.entry(lemma).or_default();
        t.pages += 1;
        *t.labels.entry(label).or_default() += 1;
    }
}

fn rank_entities(side: &BTreeMap<String, LemmaTally>, k: usize, base: u64) -> Vec<EntityCount> {
    let mut rows: Vec<EntityCount> = side
        .iter()
        .map(|(lemma, t)| {
            // majority label, ties to the first label in enum order
            let label = t
                .labels
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map_or(EntityLabel::Misc, |(l, _)| *l);
            EntityCount { lemma: lemma.clone(), label, count: t.pages, pct: percent(t.pages, base) }
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.lemma.cmp(&b.lemma)));
    rows.truncate(k);
    rows
}

/// Top `k` deleted and added entities, each counted once per page and side.
pub fn entity_deltas<'a, R: EntityRecognizer + ?Sized>(
    diffs: impl IntoIterator<Item = &'a ContentDiff>,
    recognizer: &R,
    k: usize,
) -> Result<EntityDeltas, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidK);
    }
    let mut counter = EntityCounter::default();
    for d in diffs {
        counter.add_page(d, recognizer);
    }
    Ok(counter.top(k))
}
