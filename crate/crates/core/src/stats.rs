//! Per-page relevance metrics and bootstrap confidence intervals.
//!
//! Resampling uses ChaCha8 keyed by `seed_from_u64(seed)` with the resample
//! index as the ChaCha stream id, so every resample owns an independent
//! stream and results do not depend on evaluation order. Indices are drawn
//! with `rand`'s uniform range sampling.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{DateTime, Datelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::lineage::PageStatus;

/// One row of a revision log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionLogEntry {
    pub title: String,
    pub rev_id: u64,
    pub timestamp: DateTime<Utc>,
    pub user: String,
    pub is_ip: bool,
    #[serde(default)]
    pub was_reverted: bool,
}

/// Whether a username is an IPv4 or IPv6 literal, i.e. an anonymous edit.
pub fn is_ip_literal(user: &str) -> bool {
    user.trim().parse::<core::net::IpAddr>().is_ok()
}

/// A calendar month, written `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(YearMonth { year, month })
    }

    pub fn of(ts: &DateTime<Utc>) -> Self {
        YearMonth { year: ts.year(), month: ts.month() }
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidMonth(pub String);

impl fmt::Display for InvalidMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}` is not a YYYY-MM month", self.0)
    }
}

impl core::error::Error for InvalidMonth {}

impl FromStr for YearMonth {
    type Err = InvalidMonth;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || InvalidMonth(s.into());
        let (y, m) = s.split_once('-').ok_or_else(err)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let year = y.parse().map_err(|_| err())?;
        let month = m.parse().map_err(|_| err())?;
        YearMonth::new(year, month).ok_or_else(err)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive range of months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthWindow {
    pub fn new(start: YearMonth, end: YearMonth) -> Option<Self> {
        (start <= end).then_some(MonthWindow { start, end })
    }

    pub fn contains(&self, month: YearMonth) -> bool {
        self.start <= month && month <= self.end
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        core::iter::successors(Some(self.start), |m| Some(m.next())).take_while(|m| *m <= self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceMetrics {
    pub title: String,
    pub monthly_views: f64,
    pub edit_count: u64,
    pub ip_edit_rate: f64,
    pub revert_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MonthlyViews,
    EditCount,
    IpEditRate,
    RevertRate,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::MonthlyViews, Metric::EditCount, Metric::IpEditRate, Metric::RevertRate];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::MonthlyViews => "monthly_views",
            Metric::EditCount => "edit_count",
            Metric::IpEditRate => "ip_edit_rate",
            Metric::RevertRate => "revert_rate",
        }
    }

    pub fn value(self, m: &RelevanceMetrics) -> f64 {
        match self {
            Metric::MonthlyViews => m.monthly_views,
            Metric::EditCount => m.edit_count as f64,
            Metric::IpEditRate => m.ip_edit_rate,
            Metric::RevertRate => m.revert_rate,
        }
    }
}

/// Relevance metrics of one page over `window`.
///
/// Entries outside the window are ignored; months without view data count
/// as zero. An empty log yields zero edits and zero rates.
pub fn compute_metrics<'a>(
    title: &str,
    log: impl IntoIterator<Item = &'a RevisionLogEntry>,
    views: &BTreeMap<YearMonth, u64>,
    window: MonthWindow,
) -> RelevanceMetrics {
    let (mut edits, mut ip, mut reverted) = (0u64, 0u64, 0u64);
    for entry in log {
        if window.contains(YearMonth::of(&entry.timestamp)) {
            edits += 1;
            ip += u64::from(entry.is_ip);
            reverted += u64::from(entry.was_reverted);
        }
    }
    let (mut total_views, mut months) = (0u64, 0u64);
    for month in window.months() {
        total_views += views.get(&month).copied().unwrap_or(0);
        months += 1;
    }
    let rate = |n: u64| if edits == 0 { 0.0 } else { n as f64 / edits as f64 };
    RelevanceMetrics {
        title: title.into(),
        monthly_views: total_views as f64 / months as f64,
        edit_count: edits,
        ip_edit_rate: rate(ip),
        revert_rate: rate(reverted),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub sample_size: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { n_resamples: 10_000, sample_size: 1_000, confidence: 0.95, seed: 42 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.n_resamples == 0 {
            return Err(StatsError::InvalidConfig("n_resamples must be at least 1"));
        }
        if self.sample_size == 0 {
            return Err(StatsError::InvalidConfig("sample_size must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(StatsError::InvalidConfig("confidence must lie in (0, 1)"));
        }
        Ok(())
    }

    /// The same configuration with a seed derived for a labelled sub-task.
    pub fn with_derived_seed(&self, salt: u64) -> Self {
        BootstrapConfig { seed: mix_seed(self.seed, salt), ..*self }
    }
}

/// Mean of resample means with a quantile confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Standard deviation of the resample means.
    pub std_error: f64,
    pub n_resamples: usize,
    pub sample_size: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsError {
    EmptyValues,
    InvalidConfig(&'static str),
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::EmptyValues => f.write_str("bootstrap needs at least one value"),
            StatsError::InvalidConfig(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for StatsError {}

/// Mean of one resample of `sample_size` values drawn with replacement,
/// using the stream reserved for resample `index`.
pub fn resample_mean(values: &[f64], seed: u64, index: u64, sample_size: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = values.len();
    let mut sum = 0.0;
    for _ in 0..sample_size {
        sum += values[rng.random_range(0..n)];
    }
    sum / sample_size as f64
}

pub fn bootstrap_estimate(values: &[f64], config: &BootstrapConfig) -> Result<BootstrapEstimate, StatsError> {
    config.validate()?;
    if values.is_empty() {
        return Err(StatsError::EmptyValues);
    }
    let means: Vec<f64> =
        (0..config.n_resamples as u64).map(|i| resample_mean(values, config.seed, i, config.sample_size)).collect();
    Ok(summarize_resamples(means, config))
}

/// Turn resample means (in any order) into an estimate.
///
/// The interval is the pair of linearly interpolated empirical quantiles at
/// `(1 - confidence) / 2` and `1 - (1 - confidence) / 2`, widened if needed so
/// that it contains the mean.
pub fn summarize_resamples(mut means: Vec<f64>, config: &BootstrapConfig) -> BootstrapEstimate {
    means.sort_by(f64::total_cmp);
    let n = means.len();
    let (first, last) = (means[0], means[n - 1]);
    let mean = if first == last { first } else { means.iter().sum::<f64>() / n as f64 };
    let std_error = if n > 1 && first != last {
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1) as f64;
        libm::sqrt(var)
    } else {
        0.0
    };
    let tail = (1.0 - config.confidence) / 2.0;
    let low = quantile_sorted(&means, tail);
    let high = quantile_sorted(&means, 1.0 - tail);
    BootstrapEstimate {
        mean,
        ci_low: low.min(mean),
        ci_high: high.max(mean),
        std_error,
        n_resamples: n,
        sample_size: config.sample_size,
        confidence: config.confidence,
    }
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// SplitMix64 finaliser over `seed` and `salt`; used to fan one seed out to
/// independent sub-tasks.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Bootstrap estimates keyed by (group, metric). Groups without pages are
/// left out and reported in `empty_groups`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEstimates {
    pub estimates: BTreeMap<PageStatus, BTreeMap<Metric, BootstrapEstimate>>,
    pub group_sizes: BTreeMap<PageStatus, usize>,
    pub empty_groups: Vec<PageStatus>,
    /// Metrics titles that had no status; they are ignored.
    pub unassigned: Vec<String>,
}

pub fn group_estimates(
    metrics: &[RelevanceMetrics],
    statuses: &BTreeMap<String, PageStatus>,
    config: &BootstrapConfig,
) -> Result<GroupEstimates, StatsError> {
    config.validate()?;
    let mut groups: BTreeMap<PageStatus, Vec<&RelevanceMetrics>> = BTreeMap::new();
    let mut unassigned = Vec::new();
    for m in metrics {
        match statuses.get(&m.title) {
            Some(status) => groups.entry(*status).or_default().push(m),
            None => unassigned.push(m.title.clone()),
        }
    }

    let mut out = GroupEstimates {
        estimates: BTreeMap::new(),
        group_sizes: BTreeMap::new(),
        empty_groups: Vec::new(),
        unassigned,
    };
    for (g, status) in PageStatus::ALL.into_iter().enumerate() {
        let Some(pages) = groups.get(&status) else {
            out.empty_groups.push(status);
            continue;
        };
        out.group_sizes.insert(status, pages.len());
        let per_metric = out.estimates.entry(status).or_default();
        for (k, metric) in Metric::ALL.into_iter().enumerate() {
            let values: Vec<f64> = pages.iter().map(|m| metric.value(m)).collect();
            let cfg = config.with_derived_seed((g * Metric::ALL.len() + k) as u64);
            per_metric.insert(metric, bootstrap_estimate(&values, &cfg)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewsShare {
    pub shares: BTreeMap<PageStatus, f64>,
    pub total_views: f64,
}

/// Fraction of all views generated by each status group.
///
/// With zero total views every present group gets share 0.
pub fn views_share(metrics: &[RelevanceMetrics], statuses: &BTreeMap<String, PageStatus>) -> ViewsShare {
    let mut per_group: BTreeMap<PageStatus, f64> = BTreeMap::new();
    for m in metrics {
        if let Some(status) = statuses.get(&m.title) {
            *per_group.entry(*status).or_default() += m.monthly_views;
        }
    }
    let total: f64 = per_group.values().sum();
    let shares = per_group.into_iter().map(|(s, v)| (s, if total > 0.0 { v / total } else { 0.0 })).collect();
    ViewsShare { shares, total_views: total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn entry(day: u32, user: &str, reverted: bool) -> RevisionLogEntry {
        let ts = chrono::NaiveDate::from_ymd_opt(2023, 5, day).unwrap().and_hms_opt(12, 0, 0).unwrap().and_utc();
        RevisionLogEntry {
            title: "P".into(),
            rev_id: u64::from(day),
            timestamp: ts,
            user: user.into(),
            is_ip: is_ip_literal(user),
            was_reverted: reverted,
        }
    }

    fn may() -> MonthWindow {
        let m = YearMonth::new(2023, 5).unwrap();
        MonthWindow::new(m, m).unwrap()
    }

    #[test]
    fn ten_edits_two_ips_one_revert() {
        let mut log: Vec<_> = (1..=8).map(|d| entry(d, "Alice", false)).collect();
        log.push(entry(9, "192.168.0.1", true));
        log.push(entry(10, "2001:db8::1", false));
        let m = compute_metrics("P", &log, &BTreeMap::new(), may());
        assert_eq!(m.edit_count, 10);
        assert_eq!(m.ip_edit_rate, 0.2);
        assert_eq!(m.revert_rate, 0.1);
    }

    #[test]
    fn empty_log_has_zero_rates() {
        let m = compute_metrics("P", &[], &BTreeMap::new(), may());
        assert_eq!((m.edit_count, m.ip_edit_rate, m.revert_rate, m.monthly_views), (0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_counted_fixture_log() {
        // 25 entries across April..June; window May..June.
        let mut log = Vec::new();
        let users = ["Alice", "10.0.0.1", "Bob", "Carol", "::1"];
        for i in 0..25u32 {
            let (month, day) = if i < 7 {
                (4, i + 1)
            } else if i < 16 {
                (5, i)
            } else {
                (6, i - 10)
            };
            let ts = chrono::NaiveDate::from_ymd_opt(2023, month, day).unwrap().and_hms_opt(8, 0, 0).unwrap().and_utc();
            let user = users[(i % 5) as usize];
            log.push(RevisionLogEntry {
                title: "P".into(),
                rev_id: u64::from(i) + 1,
                timestamp: ts,
                user: user.into(),
                is_ip: is_ip_literal(user),
                was_reverted: i % 6 == 0,
            });
        }
        let window = MonthWindow::new("2023-05".parse().unwrap(), "2023-06".parse().unwrap()).unwrap();
        let mut views = BTreeMap::new();
        views.insert("2023-04".parse().unwrap(), 1000);
        views.insert("2023-05".parse().unwrap(), 300);
        let m = compute_metrics("P", &log, &views, window);
        // i = 7..=24 are in window; IPs are i % 5 in {1, 4}: 9, 11, 14, 16, 19, 21, 24 -> 7
        // reverted are i % 6 == 0: 12, 18, 24 -> 3
        assert_eq!(m.edit_count, 18);
        assert_eq!(m.ip_edit_rate, 7.0 / 18.0);
        assert_eq!(m.revert_rate, 3.0 / 18.0);
        assert_eq!(m.monthly_views, 150.0);
    }

    #[test]
    fn month_parsing() {
        assert_eq!("2023-09".parse::<YearMonth>().unwrap(), YearMonth { year: 2023, month: 9 });
        for bad in ["2023-13", "2023-9", "23-09", "2023/09", "abcd-ef", ""] {
            assert!(bad.parse::<YearMonth>().is_err(), "{bad}");
        }
        assert_eq!(YearMonth::new(2023, 12).unwrap().next().to_string(), "2024-01");
    }

    #[test]
    fn zero_variance_gives_zero_width_interval() {
        let cfg = BootstrapConfig { n_resamples: 500, sample_size: 100, ..Default::default() };
        let est = bootstrap_estimate(&[5.0; 40], &cfg).unwrap();
        assert_eq!((est.mean, est.ci_low, est.ci_high, est.std_error), (5.0, 5.0, 5.0, 0.0));
        let est = bootstrap_estimate(&[0.1; 3], &cfg).unwrap();
        assert_eq!(est.ci_low, est.ci_high);
        let est = bootstrap_estimate(&[7.0], &cfg).unwrap();
        assert_eq!((est.mean, est.ci_low, est.ci_high), (7.0, 7.0, 7.0));
    }

    #[test]
    fn empty_values_and_bad_config_are_rejected() {
        assert_eq!(bootstrap_estimate(&[], &BootstrapConfig::default()), Err(StatsError::EmptyValues));
        let cfg = BootstrapConfig { confidence: 1.0, ..Default::default() };
        assert!(matches!(bootstrap_estimate(&[1.0], &cfg), Err(StatsError::InvalidConfig(_))));
    }

    #[test]
    fn normal_interval_width_matches_clt() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let est = bootstrap_estimate(&values, &BootstrapConfig::default()).unwrap();
        let expected = 2.0 * 1.96 / libm::sqrt(1000.0);
        let width = est.ci_high - est.ci_low;
        assert!((width - expected).abs() / expected < 0.15, "width {width} vs {expected}");
    }

    #[test]
    fn sample_size_may_exceed_population() {
        let cfg = BootstrapConfig { n_resamples: 200, sample_size: 1000, ..Default::default() };
        let est = bootstrap_estimate(&[1.0, 3.0], &cfg).unwrap();
        assert!((est.mean - 2.0).abs() < 0.05);
        assert!(est.ci_low <= est.mean && est.mean <= est.ci_high);
    }

    #[test]
    fn quantiles_interpolate() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&data, 0.0), 1.0);
        assert_eq!(quantile_sorted(&data, 0.5), 3.0);
        assert_eq!(quantile_sorted(&data, 0.1), 1.4);
        assert_eq!(quantile_sorted(&data, 1.0), 5.0);
    }

    fn page(title: &str, views: f64) -> RelevanceMetrics {
        RelevanceMetrics {
            title: title.into(),
            monthly_views: views,
            edit_count: 1,
            ip_edit_rate: 0.0,
            revert_rate: 0.0,
        }
    }

    #[test]
    fn changed_pages_ten_times_the_views() {
        let mut metrics = Vec::new();
        let mut statuses = BTreeMap::new();
        for i in 0..200 {
            let (title, status, base) = if i < 50 {
                (alloc::format!("c{i}"), PageStatus::Changed, 1000.0)
            } else {
                (alloc::format!("d{i}"), PageStatus::Duplicated, 100.0)
            };
            metrics.push(page(&title, base + (i % 7) as f64 * base / 10.0));
            statuses.insert(title, status);
        }
        let cfg = BootstrapConfig { n_resamples: 2000, sample_size: 200, ..Default::default() };
        let out = group_estimates(&metrics, &statuses, &cfg).unwrap();
        let c = out.estimates[&PageStatus::Changed][&Metric::MonthlyViews];
        let d = out.estimates[&PageStatus::Duplicated][&Metric::MonthlyViews];
        assert!((c.mean / d.mean - 10.0).abs() < 0.5, "{} / {}", c.mean, d.mean);
        assert!(c.ci_low > d.ci_high);
        assert_eq!(out.empty_groups, vec![PageStatus::Missing]);
    }

    #[test]
    fn single_group_output() {
        let metrics = vec![page("a", 1.0), page("b", 2.0)];
        let statuses = [("a".to_string(), PageStatus::Missing), ("b".to_string(), PageStatus::Missing)].into();
        let cfg = BootstrapConfig { n_resamples: 50, sample_size: 10, ..Default::default() };
        let out = group_estimates(&metrics, &statuses, &cfg).unwrap();
        assert_eq!(out.estimates.keys().copied().collect::<Vec<_>>(), vec![PageStatus::Missing]);
        assert_eq!(out.estimates[&PageStatus::Missing].len(), 4);
    }

    #[test]
    fn views_share_cases() {
        let statuses: BTreeMap<String, PageStatus> =
            [("a".to_string(), PageStatus::Changed), ("b".to_string(), PageStatus::Duplicated)].into();
        let share = views_share(&[page("a", 10.0), page("b", 0.0)], &statuses);
        assert_eq!(share.shares[&PageStatus::Changed], 1.0);

        let share = views_share(&[page("a", 0.0), page("b", 0.0)], &statuses);
        assert_eq!(share.total_views, 0.0);
        assert!(share.shares.values().all(|v| *v == 0.0));

        // 20-page skewed fixture summed by hand: changed pages 1..=4 hold
        // 1000+2000+3000+4000 = 10000, duplicated 5..=19 hold 15 * 100 = 1500,
        // missing page 20 holds 500. Total 12000.
        let mut metrics = Vec::new();
        let mut statuses = BTreeMap::new();
        for i in 1..=20 {
            let t = alloc::format!("p{i}");
            let (status, v) = match i {
                1..=4 => (PageStatus::Changed, 1000.0 * i as f64),
                20 => (PageStatus::Missing, 500.0),
                _ => (PageStatus::Duplicated, 100.0),
            };
            metrics.push(page(&t, v));
            statuses.insert(t, status);
        }
        let share = views_share(&metrics, &statuses);
        assert_eq!(share.total_views, 12000.0);
        assert_eq!(share.shares[&PageStatus::Changed], 10000.0 / 12000.0);
        assert_eq!(share.shares[&PageStatus::Duplicated], 1500.0 / 12000.0);
        assert_eq!(share.shares[&PageStatus::Missing], 500.0 / 12000.0);
    }

    #[test]
    fn uniform_views_follow_group_sizes() {
        let mut metrics = Vec::new();
        let mut statuses = BTreeMap::new();
        for i in 0..10_000 {
            let status = match i {
                0..=9732 => PageStatus::Duplicated,
                9733..=9907 => PageStatus::Changed,
                _ => PageStatus::Missing,
            };
            let t = alloc::format!("p{i}");
            metrics.push(page(&t, 3.0));
            statuses.insert(t, status);
        }
        let share = views_share(&metrics, &statuses);
        assert!((share.shares[&PageStatus::Duplicated] - 0.9733).abs() < 1e-9);
        assert!((share.shares[&PageStatus::Changed] - 0.0175).abs() < 1e-9);
        assert!((share.shares[&PageStatus::Missing] - 0.0092).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn same_seed_same_estimate(values in proptest::collection::vec(-1e3f64..1e3, 1..50), seed in any::<u64>()) {
            let cfg = BootstrapConfig { n_resamples: 100, sample_size: 30, confidence: 0.9, seed };
            let a = bootstrap_estimate(&values, &cfg).unwrap();
            let b = bootstrap_estimate(&values, &cfg).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a.ci_low <= a.mean && a.mean <= a.ci_high);
        }

        #[test]
        fn scaling_by_power_of_two_is_exact(values in proptest::collection::vec(-1e3f64..1e3, 1..50), exp in -4i32..5) {
            let cfg = BootstrapConfig { n_resamples: 100, sample_size: 30, confidence: 0.95, seed: 3 };
            let c = libm::pow(2.0, f64::from(exp));
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let a = bootstrap_estimate(&values, &cfg).unwrap();
            let b = bootstrap_estimate(&scaled, &cfg).unwrap();
            prop_assert_eq!(b.mean, a.mean * c);
            prop_assert_eq!(b.ci_low, a.ci_low * c);
            prop_assert_eq!(b.ci_high, a.ci_high * c);
        }

        #[test]
        fn scaling_is_proportional(values in proptest::collection::vec(0.0f64..1e3, 1..50), c in 0.01f64..100.0) {
            let cfg = BootstrapConfig { n_resamples: 100, sample_size: 30, confidence: 0.95, seed: 5 };
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let a = bootstrap_estimate(&values, &cfg).unwrap();
            let b = bootstrap_estimate(&scaled, &cfg).unwrap();
            for (x, y) in [(a.mean, b.mean), (a.ci_low, b.ci_low), (a.ci_high, b.ci_high)] {
                prop_assert!((x * c - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn shares_sum_to_one(views in proptest::collection::vec(0.0f64..1e6, 1..40)) {
            let mut metrics = Vec::new();
            let mut statuses = BTreeMap::new();
            for (i, v) in views.iter().enumerate() {
                let t = alloc::format!("p{i}");
                metrics.push(page(&t, *v));
                statuses.insert(t, PageStatus::ALL[i % 3]);
            }
            let share = views_share(&metrics, &statuses);
            if share.total_views > 0.0 {
                prop_assert!((share.shares.values().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
