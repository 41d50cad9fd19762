//! Pipeline configuration file (`run.toml`).

use std::fs;
use std::path::{Path, PathBuf};

use forkdiff_core::analytics::OfficeHours;
use forkdiff_core::diff::SimilarityThreshold;
use forkdiff_core::stats::{BootstrapConfig, MonthWindow, YearMonth};
use forkdiff_core::taxonomy::TaxonomyConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{DEFAULT_COMPLETION_MODEL, DEFAULT_EMBEDDING_MODEL};
use crate::mediawiki::{WikiEndpoint, FIXTURE_SCHEME};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Threads for page fetching.
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub upstream: WikiEndpoint,
    pub fork: WikiEndpoint,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub diff: DiffParams,
    #[serde(default)]
    pub stats: StatsParams,
    #[serde(default)]
    pub analyze: AnalyzeParams,
    #[serde(default)]
    pub taxonomy: TaxonomyParams,
    #[serde(default)]
    pub stages: StageToggles,
    #[serde(skip)]
    hash: String,
}

fn default_seed() -> u64 {
    42
}

fn default_workers() -> usize {
    4
}

/// Input and output locations. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub titles: Option<PathBuf>,
    /// Upstream revision log; feeds the relevance statistics and the
    /// upstream heatmap.
    pub revlog_upstream: Option<PathBuf>,
    pub revlog_fork: Option<PathBuf>,
    /// Monthly views. When absent they are fetched from the upstream
    /// pageviews API during the crawl.
    pub views: Option<PathBuf>,
    pub geo: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    /// Directory with `summary.txt`, `fit.txt`, `reassign.txt` and
    /// `naming.txt`; missing files fall back to the built-in prompts.
    pub templates: Option<PathBuf>,
    /// Parent of the per-config run directories.
    #[serde(default = "default_run_root")]
    pub runs: PathBuf,
    /// Response cache; `FORKDIFF_CACHE_DIR` takes precedence.
    pub cache: Option<PathBuf>,
}

fn default_run_root() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffParams {
    #[serde(default)]
    pub threshold: SimilarityThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsParams {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_window_start")]
    pub window_start: YearMonth,
    #[serde(default = "default_window_end")]
    pub window_end: YearMonth,
}

fn default_resamples() -> usize {
    10_000
}

fn default_sample_size() -> usize {
    1_000
}

fn default_confidence() -> f64 {
    0.95
}

fn default_window_start() -> YearMonth {
    YearMonth::new(2022, 1).expect("valid month")
}

fn default_window_end() -> YearMonth {
    YearMonth::new(2023, 9).expect("valid month")
}

impl Default for StatsParams {
    fn default() -> Self {
        StatsParams {
            resamples: default_resamples(),
            sample_size: default_sample_size(),
            confidence: default_confidence(),
            window_start: default_window_start(),
            window_end: default_window_end(),
        }
    }
}

impl StatsParams {
    pub fn window(&self) -> Result<MonthWindow> {
        MonthWindow::new(self.window_start, self.window_end).ok_or_else(|| {
            Error::Config(format!(
                "stats.window_start {} is after stats.window_end {}",
                self.window_start, self.window_end
            ))
        })
    }

    pub fn bootstrap(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            n_resamples: self.resamples,
            sample_size: self.sample_size,
            confidence: self.confidence,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RecognizerConfig {
    /// Dictionary lookup over `paths.gazetteer`.
    Gazetteer,
    Subprocess {
        command: Vec<String>,
    },
    Http {
        url: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeParams {
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_true")]
    pub bot_filter: bool,
    /// Accounts treated as bots in addition to the name heuristic.
    #[serde(default)]
    pub extra_bots: Vec<String>,
    #[serde(default)]
    pub office_hours: OfficeHours,
    #[serde(default = "default_recognizer")]
    pub recognizer: RecognizerConfig,
}

fn default_top_k() -> usize {
    5
}

fn default_true() -> bool {
    true
}

fn default_recognizer() -> RecognizerConfig {
    RecognizerConfig::Gazetteer
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        AnalyzeParams {
            top_k: default_top_k(),
            bot_filter: true,
            extra_bots: Vec::new(),
            office_hours: OfficeHours::default(),
            recognizer: default_recognizer(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyParams {
    #[serde(default = "default_backend")]
    pub backend: BackendKind,
    #[serde(default = "default_llm_url")]
    pub base_url: String,
    #[serde(default = "default_completion_model")]
    pub completion_model: String,
    #[serde(default = "default_embedding_model")]
    pub embedding_model: String,
    #[serde(default = "default_llm_rate")]
    pub rate_limit: f64,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub fixed_k: Option<usize>,
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    #[serde(default = "default_naming_samples")]
    pub naming_samples: usize,
    #[serde(default = "default_silhouette_sample")]
    pub silhouette_sample: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    /// Embedding size of the mock backend.
    #[serde(default = "default_mock_dim")]
    pub mock_dim: usize,
}

fn default_backend() -> BackendKind {
    BackendKind::Mock
}

fn default_llm_url() -> String {
    "https://api.openai.com/v1".into()
}

fn default_completion_model() -> String {
    DEFAULT_COMPLETION_MODEL.into()
}

fn default_embedding_model() -> String {
    DEFAULT_EMBEDDING_MODEL.into()
}

fn default_llm_rate() -> f64 {
    5.0
}

fn default_k_min() -> usize {
    2
}

fn default_k_max() -> usize {
    15
}

fn default_max_words() -> usize {
    40
}

fn default_naming_samples() -> usize {
    20
}

fn default_silhouette_sample() -> usize {
    5_000
}

fn default_mock_dim() -> usize {
    64
}

impl Default for TaxonomyParams {
    fn default() -> Self {
        TaxonomyParams {
            backend: default_backend(),
            base_url: default_llm_url(),
            completion_model: default_completion_model(),
            embedding_model: default_embedding_model(),
            rate_limit: default_llm_rate(),
            k_min: default_k_min(),
            k_max: default_k_max(),
            fixed_k: None,
            max_words: default_max_words(),
            naming_samples: default_naming_samples(),
            silhouette_sample: default_silhouette_sample(),
            resamples: default_resamples(),
            mock_dim: default_mock_dim(),
        }
    }
}

impl TaxonomyParams {
    pub fn core_config(&self, seed: u64) -> TaxonomyConfig {
        TaxonomyConfig {
            seed,
            k_min: self.k_min,
            k_max: self.k_max,
            fixed_k: self.fixed_k,
            max_words: self.max_words,
            naming_samples: self.naming_samples,
            silhouette_sample: self.silhouette_sample,
            bootstrap_resamples: self.resamples,
            ..TaxonomyConfig::default()
        }
    }
}

/// Stages that `run` executes when no explicit list is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageToggles {
    #[serde(default = "default_true")]
    pub crawl: bool,
    #[serde(default = "default_true")]
    pub diff: bool,
    #[serde(default = "default_true")]
    pub stats: bool,
    #[serde(default = "default_true")]
    pub analyze: bool,
    #[serde(default = "default_true")]
    pub taxonomy: bool,
    #[serde(default = "default_true")]
    pub report: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles { crawl: true, diff: true, stats: true, analyze: true, taxonomy: true, report: true }
    }
}

fn range_error(key: &str, range: &str, value: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} must be in {range}, got {value}"))
}

fn resolve(base: &Path, path: &mut Option<PathBuf>) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

fn require_file(key: &str, path: &Option<PathBuf>) -> Result<()> {
    match path {
        None => Err(Error::Config(format!("{key} is required"))),
        Some(p) if !p.is_file() => Err(Error::Config(format!("{key}: {} does not exist", p.display()))),
        Some(_) => Ok(()),
    }
}

fn resolve_endpoint(base: &Path, endpoint: &mut WikiEndpoint) {
    if let Some(rest) = endpoint.base_url.strip_prefix(FIXTURE_SCHEME) {
        let p = Path::new(rest);
        if p.is_relative() {
            endpoint.base_url = format!("{FIXTURE_SCHEME}{}", base.join(p).display());
        }
    }
}

impl PipelineConfig {
    /// Parse TOML text; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut config: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.hash = config.shape_hash();
        let p = &mut config.paths;
        for path in [
            &mut p.titles,
            &mut p.revlog_upstream,
            &mut p.revlog_fork,
            &mut p.views,
            &mut p.geo,
            &mut p.gazetteer,
            &mut p.templates,
            &mut p.cache,
        ] {
            resolve(base, path);
        }
        if p.runs.is_relative() {
            p.runs = base.join(&p.runs);
        }
        resolve_endpoint(base, &mut config.upstream);
        resolve_endpoint(base, &mut config.fork);
        config.validate()?;
        Ok(config)
    }

    /// Range checks, plus existence of every input the enabled stages read.
    pub fn validate(&self) -> Result<()> {
        self.upstream.validate()?;
        self.fork.validate()?;
        if self.upstream.label == self.fork.label {
            return Err(Error::Config("upstream and fork endpoints need distinct labels".into()));
        }
        if self.workers == 0 || self.workers > 256 {
            return Err(range_error("workers", "[1, 256]", self.workers));
        }
        let s = &self.stats;
        if s.resamples == 0 {
            return Err(range_error("stats.resamples", "[1, inf)", s.resamples));
        }
        if s.sample_size == 0 {
            return Err(range_error("stats.sample_size", "[1, inf)", s.sample_size));
        }
        if !(s.confidence > 0.0 && s.confidence < 1.0) {
            return Err(range_error("stats.confidence", "(0, 1)", s.confidence));
        }
        s.window()?;
        if self.analyze.top_k == 0 {
            return Err(range_error("analyze.top_k", "[1, inf)", 0));
        }
        let oh = self.analyze.office_hours;
        if oh.first_hour > oh.last_hour || oh.last_hour > 23 {
            return Err(range_error(
                "analyze.office_hours",
                "0 <= first_hour <= last_hour <= 23",
                format!("{}..{}", oh.first_hour, oh.last_hour),
            ));
        }
        let t = &self.taxonomy;
        if t.k_min < 2 || t.k_min > t.k_max {
            return Err(range_error(
                "taxonomy.k_min..k_max",
                "2 <= k_min <= k_max",
                format!("{}..{}", t.k_min, t.k_max),
            ));
        }
        if t.fixed_k == Some(0) {
            return Err(range_error("taxonomy.fixed_k", "[1, inf)", 0));
        }
        if t.max_words == 0 || t.naming_samples == 0 || t.resamples == 0 || t.mock_dim == 0 {
            return Err(Error::Config(
                "taxonomy.max_words, naming_samples, resamples and mock_dim must be at least 1".into(),
            ));
        }
        if t.silhouette_sample < 2 {
            return Err(range_error("taxonomy.silhouette_sample", "[2, inf)", t.silhouette_sample));
        }
        if !(t.rate_limit > 0.0 && t.rate_limit.is_finite()) {
            return Err(range_error("taxonomy.rate_limit", "(0, inf)", t.rate_limit));
        }
        if let RecognizerConfig::Subprocess { command } = &self.analyze.recognizer {
            if command.is_empty() {
                return Err(Error::Config("analyze.recognizer.command is empty".into()));
            }
        }

        let p = &self.paths;
        let st = &self.stages;
        if st.crawl {
            require_file("paths.titles", &p.titles)?;
        }
        if st.stats {
            require_file("paths.revlog_upstream", &p.revlog_upstream)?;
            if p.views.is_some() {
                require_file("paths.views", &p.views)?;
            } else if self.upstream.pageviews.is_none() {
                return Err(Error::Config("paths.views is required unless upstream.pageviews is configured".into()));
            }
        }
        if st.analyze {
            require_file("paths.revlog_upstream", &p.revlog_upstream)?;
            require_file("paths.revlog_fork", &p.revlog_fork)?;
            if p.geo.is_some() {
                require_file("paths.geo", &p.geo)?;
            }
            if p.gazetteer.is_some() {
                require_file("paths.gazetteer", &p.gazetteer)?;
            }
        }
        if let Some(dir) = &p.templates {
            if !dir.is_dir() {
                return Err(Error::Config(format!("paths.templates: {} is not a directory", dir.display())));
            }
        }
        Ok(())
    }

    fn shape_hash(&self) -> String {
        let mut shaped = self.clone();
        shaped.stages = StageToggles::default();
        shaped.workers = default_workers();
        let json = serde_json::to_vec(&shaped).expect("config serializes");
        crate::io::sha256_hex(&json)
    }

    /// Hash over everything that shapes the outputs, taken before relative
    /// paths are resolved so a moved config directory keeps its hash. Stage
    /// toggles and the worker count do not count.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

/// Read, default and range-check a config file.
pub fn validate_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    PipelineConfig::from_toml(&text, &base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (tempfile::TempDir, String) {
        let dir = tempfile::tempdir().unwrap();
        for f in ["titles.txt", "up.jsonl", "fork.jsonl", "views.jsonl"] {
            fs::write(dir.path().join(f), "").unwrap();
        }
        let minimal = r#"
[upstream]
base_url = "https://ru.wikipedia.org/w/api.php"
label = "upstream"

[fork]
base_url = "https://ru.ruwiki.ru/w/api.php"
label = "fork"

[paths]
titles = "titles.txt"
revlog_upstream = "up.jsonl"
revlog_fork = "fork.jsonl"
views = "views.jsonl"
"#
        .to_string();
        (dir, minimal)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let (dir, text) = setup();
        let c = PipelineConfig::from_toml(&text, dir.path()).unwrap();
        assert_eq!(c.diff.threshold.value(), 0.6);
        assert_eq!(c.stats.resamples, 10_000);
        assert_eq!(c.stats.sample_size, 1_000);
        assert_eq!(c.taxonomy.k_min, 2);
        assert_eq!(c.taxonomy.k_max, 15);
        assert_eq!(c.seed, 42);
        assert_eq!(c.paths.titles.as_deref(), Some(dir.path().join("titles.txt").as_path()));
        assert_eq!(c.paths.runs, dir.path().join("runs"));
    }

    #[test]
    fn threshold_out_of_range() {
        let (dir, text) = setup();
        let err = PipelineConfig::from_toml(&format!("{text}\n[diff]\nthreshold = 1.5\n"), dir.path()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("1.5"), "{err}");
    }

    #[test]
    fn missing_titles_path() {
        let (dir, text) = setup();
        let text = text.replace("titles = \"titles.txt\"\n", "");
        let err = PipelineConfig::from_toml(&text, dir.path()).unwrap_err();
        assert!(err.to_string().contains("paths.titles"), "{err}");
        fs::remove_file(dir.path().join("titles.txt")).unwrap();
        let (_, full) = setup();
        let err = PipelineConfig::from_toml(&full, dir.path()).unwrap_err();
        assert!(err.to_string().contains("does not exist"), "{err}");
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let (dir, text) = setup();
        let err = PipelineConfig::from_toml(&format!("{text}\n[stats]\nresample = 5\n"), dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("resample") && msg.contains("resamples") && msg.contains("sample_size"), "{msg}");
    }

    #[test]
    fn other_ranges() {
        let (dir, text) = setup();
        for extra in [
            "[stats]\nconfidence = 1.0",
            "[taxonomy]\nk_min = 1",
            "[analyze]\ntop_k = 0",
            "[analyze.office_hours]\nfirst_hour = 9\nlast_hour = 24",
        ] {
            let err = PipelineConfig::from_toml(&format!("{text}\n{extra}\n"), dir.path()).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{extra}");
        }
    }

    #[test]
    fn hash_ignores_toggles() {
        let (dir, text) = setup();
        let a = PipelineConfig::from_toml(&text, dir.path()).unwrap();
        let b = PipelineConfig::from_toml(&format!("workers = 9\n{text}\n[stages]\ntaxonomy = false\n"), dir.path())
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = PipelineConfig::from_toml(&format!("seed = 7\n{text}"), dir.path()).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
