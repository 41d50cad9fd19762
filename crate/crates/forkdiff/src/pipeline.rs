//! Staged, resumable pipeline over one run directory.
//!
//! Each stage records the checksums of what it read and wrote in
//! `run_manifest.json`. A stage whose inputs are unchanged and whose outputs
//! are intact is skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use forkdiff_core::analytics::{BotFilter, EntityRecognizer, Gazetteer};
use forkdiff_core::diff::ContentDiff;
use forkdiff_core::lineage::PageRecord;
use forkdiff_core::stats::{mix_seed, RevisionLogEntry};
use forkdiff_core::taxonomy::{build_taxonomy, LlmBackend, Taxonomy};
use serde::{Deserialize, Serialize};

use crate::cache::DiskCache;
use crate::config::{BackendKind, PipelineConfig, RecognizerConfig};
use crate::crawl::{crawl, fetch_views, CrawlManifest};
use crate::error::{Error, Result};
use crate::io::{
    file_sha256, load_geo, load_title_list, load_views, read_json, read_jsonl, sha256_hex, to_json_pretty, to_jsonl,
    write_atomic,
};
use crate::llm::{CachedBackend, HttpBackend, MockBackend, LLM_KEY_ENV};
use crate::mediawiki::{FixtureWiki, MediaWikiClient, WikiEndpoint, FIXTURE_SCHEME};
use crate::recognizer::{HttpRecognizer, SubprocessRecognizer};
use crate::report;
use crate::stages::{self, Analysis, AnalyzeInputs, DiffReport, StatsReport};
use crate::transport::{ReqwestTransport, RetryPolicy, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Crawl,
    Diff,
    Stats,
    Analyze,
    Taxonomy,
    Report,
}

impl Stage {
    /// Dependency order.
    pub const ALL: [Stage; 6] =
        [Stage::Crawl, Stage::Diff, Stage::Stats, Stage::Analyze, Stage::Taxonomy, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Crawl => "crawl",
            Stage::Diff => "diff",
            Stage::Stats => "stats",
            Stage::Analyze => "analyze",
            Stage::Taxonomy => "taxonomy",
            Stage::Report => "report",
        }
    }

    /// Seed of this stage, derived from the top-level seed and the stage name.
    pub fn seed(self, seed: u64) -> u64 {
        let digest = sha256_hex(self.name().as_bytes());
        mix_seed(seed, u64::from_str_radix(&digest[..16], 16).expect("hex digest"))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL.into_iter().find(|st| st.name() == s.trim()).ok_or_else(|| {
            let valid: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown stage `{s}`; valid stages: {}", valid.join(", ")))
        })
    }
}

/// Comma-separated stage list, returned in dependency order.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>> {
    let set: BTreeSet<Stage> =
        list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if set.is_empty() {
        return Err(Error::Config("empty stage list".into()));
    }
    Ok(set.into_iter().collect())
}

// Artifacts, relative to the run directory.
pub const PAGES: &str = "pages.jsonl";
pub const CRAWL_MANIFEST: &str = "crawl.json";
pub const FETCHED_VIEWS: &str = "views.jsonl";
pub const DIFFS: &str = "diffs.jsonl";
pub const DIFF_REPORT: &str = "diff.json";
pub const STATS: &str = "stats.json";
pub const ANALYSIS: &str = "analysis.json";
pub const TAXONOMY: &str = "taxonomy.json";
pub const REPORT_DIR: &str = "report";
pub const RUN_MANIFEST: &str = "run_manifest.json";

const ANALYZE_REPORTS: [&str; 5] = ["temporal.csv", "geo.csv", "categories.csv", "references.csv", "entities.csv"];

fn producer(artifact: &str) -> Stage {
    match artifact {
        PAGES | CRAWL_MANIFEST | FETCHED_VIEWS => Stage::Crawl,
        DIFFS | DIFF_REPORT => Stage::Diff,
        STATS => Stage::Stats,
        TAXONOMY => Stage::Taxonomy,
        _ => Stage::Analyze,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Input name to sha256. External files are keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub seed: u64,
    pub finished_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub stages: BTreeMap<Stage, StageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlannedAction {
    Run,
    UpToDate,
    /// Runs after the listed earlier stages have run.
    After(Vec<Stage>),
    Blocked(String),
}

impl fmt::Display for PlannedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannedAction::Run => f.write_str("run"),
            PlannedAction::UpToDate => f.write_str("up to date, skip"),
            PlannedAction::After(stages) => {
                let names: Vec<&str> = stages.iter().map(|s| s.name()).collect();
                write!(f, "run after {}", names.join(", "))
            }
            PlannedAction::Blocked(why) => write!(f, "blocked: {why}"),
        }
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub run_dir: PathBuf,
}

/// Inputs of a stage: run-dir artifacts plus external files and a config
/// fingerprint.
struct StageInputs {
    artifacts: Vec<&'static str>,
    files: Vec<(&'static str, PathBuf)>,
    config: serde_json::Value,
}

impl Pipeline {
    /// The run directory is `<paths.runs>/<first 16 hex digits of the config
    /// hash>`.
    pub fn new(config: PipelineConfig) -> Self {
        let run_dir = config.paths.runs.join(&config.hash()[..16]);
        Pipeline { config, run_dir }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.run_dir.join(name)
    }

    pub fn report_dir(&self) -> PathBuf {
        self.run_dir.join(REPORT_DIR)
    }

    /// Stages enabled in the config, in dependency order.
    pub fn default_stages(&self) -> Vec<Stage> {
        let t = &self.config.stages;
        let on = [t.crawl, t.diff, t.stats, t.analyze, t.taxonomy, t.report];
        Stage::ALL.into_iter().zip(on).filter(|(_, on)| *on).map(|(s, _)| s).collect()
    }

    pub fn load_manifest(&self) -> RunManifest {
        read_json(&self.artifact(RUN_MANIFEST)).unwrap_or_else(|_| RunManifest {
            config_hash: self.config.hash().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            stages: BTreeMap::new(),
        })
    }

    fn views_fetched(&self) -> bool {
        self.config.paths.views.is_none()
    }

    fn inputs(&self, stage: Stage) -> StageInputs {
        let c = &self.config;
        let p = &c.paths;
        let mut files: Vec<(&'static str, PathBuf)> = Vec::new();
        fn push(files: &mut Vec<(&'static str, PathBuf)>, role: &'static str, path: &Option<PathBuf>) {
            if let Some(path) = path {
                files.push((role, path.clone()));
            }
        }
        let (artifacts, config) = match stage {
            Stage::Crawl => {
                push(&mut files, "titles", &p.titles);
                let window = self.views_fetched().then_some((c.stats.window_start, c.stats.window_end));
                (vec![], serde_json::json!({"upstream": c.upstream, "fork": c.fork, "views_window": window}))
            }
            Stage::Diff => (vec![PAGES], serde_json::json!(c.diff)),
            Stage::Stats => {
                push(&mut files, "revlog_upstream", &p.revlog_upstream);
                push(&mut files, "views", &p.views);
                let mut a = vec![PAGES];
                if self.views_fetched() {
                    a.push(FETCHED_VIEWS);
                }
                (a, serde_json::json!({"stats": c.stats, "seed": c.seed}))
            }
            Stage::Analyze => {
                push(&mut files, "revlog_upstream", &p.revlog_upstream);
                push(&mut files, "revlog_fork", &p.revlog_fork);
                push(&mut files, "geo", &p.geo);
                push(&mut files, "gazetteer", &p.gazetteer);
                (vec![PAGES, DIFFS], serde_json::json!(c.analyze))
            }
            Stage::Taxonomy => {
                if let Some(dir) = &p.templates {
                    for f in ["summary.txt", "fit.txt", "reassign.txt", "naming.txt"] {
                        let path = dir.join(f);
                        if path.is_file() {
                            files.push((f, path));
                        }
                    }
                }
                (vec![DIFFS], serde_json::json!({"taxonomy": c.taxonomy, "seed": c.seed}))
            }
            Stage::Report => {
                let mut a = vec![PAGES, CRAWL_MANIFEST, DIFF_REPORT, STATS, ANALYSIS];
                if c.stages.taxonomy {
                    a.push(TAXONOMY);
                }
                (a, serde_json::json!({"taxonomy": c.stages.taxonomy, "config_hash": c.hash()}))
            }
        };
        StageInputs { artifacts, files, config }
    }

    fn outputs(&self, stage: Stage) -> Vec<String> {
        match stage {
            Stage::Crawl => {
                let mut v = vec![PAGES.to_string(), CRAWL_MANIFEST.to_string()];
                if self.views_fetched() {
                    v.push(FETCHED_VIEWS.into());
                }
                v
            }
            Stage::Diff => vec![DIFFS.into(), DIFF_REPORT.into()],
            Stage::Stats => vec![STATS.into()],
            Stage::Analyze => {
                let mut v = vec![ANALYSIS.to_string()];
                v.extend(ANALYZE_REPORTS.iter().map(|f| format!("{REPORT_DIR}/{f}")));
                v
            }
            Stage::Taxonomy => vec![TAXONOMY.into()],
            Stage::Report => {
                let mut v: Vec<String> = ["stats.json", "stats.csv", "summary.json", "MANIFEST.json"]
                    .iter()
                    .map(|f| format!("{REPORT_DIR}/{f}"))
                    .collect();
                if self.config.stages.taxonomy {
                    v.push(format!("{REPORT_DIR}/taxonomy.json"));
                    v.push(format!("{REPORT_DIR}/taxonomy.csv"));
                }
                v
            }
        }
    }

    /// Checksums of everything `stage` reads; `Err` names the first missing
    /// artifact.
    fn input_checksums(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let inputs = self.inputs(stage);
        let mut sums = BTreeMap::new();
        for a in &inputs.artifacts {
            let path = self.artifact(a);
            if !path.is_file() {
                return Err(Error::Dependency {
                    stage: stage.name(),
                    artifact: a.to_string(),
                    producer: producer(a).name(),
                });
            }
            sums.insert(a.to_string(), file_sha256(&path)?);
        }
        for (role, path) in &inputs.files {
            sums.insert(format!("file:{role}"), file_sha256(path)?);
        }
        sums.insert("config".into(), sha256_hex(inputs.config.to_string().as_bytes()));
        Ok(sums)
    }

    fn up_to_date(&self, stage: Stage, inputs: &BTreeMap<String, String>, manifest: &RunManifest) -> bool {
        let Some(record) = manifest.stages.get(&stage) else { return false };
        record.inputs == *inputs
            && self.outputs(stage).iter().all(|o| {
                record.outputs.get(o).is_some_and(|sum| file_sha256(&self.artifact(o)).ok().as_deref() == Some(sum))
            })
    }

    /// What running `stages` would do, without touching anything.
    pub fn plan(&self, stages: &[Stage]) -> Vec<(Stage, PlannedAction)> {
        let manifest = self.load_manifest();
        let mut will_run: Vec<Stage> = Vec::new();
        let mut out = Vec::new();
        for &stage in stages {
            let inputs = self.inputs(stage);
            let mut waiting: Vec<Stage> =
                inputs.artifacts.iter().map(|a| producer(a)).filter(|p| will_run.contains(p)).collect();
            waiting.dedup();
            let action = if !waiting.is_empty() {
                PlannedAction::After(waiting)
            } else {
                match self.input_checksums(stage) {
                    Err(e) => PlannedAction::Blocked(e.to_string()),
                    Ok(sums) if self.up_to_date(stage, &sums, &manifest) => PlannedAction::UpToDate,
                    Ok(_) => PlannedAction::Run,
                }
            };
            if matches!(action, PlannedAction::Run | PlannedAction::After(_)) {
                will_run.push(stage);
            }
            out.push((stage, action));
        }
        out
    }

    /// Run `stages` in dependency order. The manifest is saved after each
    /// stage, so a failure keeps the work of the stages before it.
    pub fn run(&self, stages: &[Stage]) -> Result<Vec<(Stage, Outcome)>> {
        let mut stages = stages.to_vec();
        stages.sort();
        stages.dedup();
        let mut manifest = self.load_manifest();
        let mut outcomes = Vec::new();
        for stage in stages {
            let inputs = self.input_checksums(stage)?;
            if self.up_to_date(stage, &inputs, &manifest) {
                log::info!("{stage}: up to date");
                outcomes.push((stage, Outcome::Skipped));
                continue;
            }
            log::info!("{stage}: running");
            self.execute(stage)?;
            let mut outputs = BTreeMap::new();
            for o in self.outputs(stage) {
                outputs.insert(o.clone(), file_sha256(&self.artifact(&o))?);
            }
            manifest.stages.insert(
                stage,
                StageRecord { inputs, outputs, seed: stage.seed(self.config.seed), finished_at: Utc::now() },
            );
            write_atomic(&self.artifact(RUN_MANIFEST), &to_json_pretty(&manifest)?)?;
            outcomes.push((stage, Outcome::Ran));
        }
        Ok(outcomes)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.artifact(name), bytes)
    }

    fn execute(&self, stage: Stage) -> Result<()> {
        let c = &self.config;
        match stage {
            Stage::Crawl => {
                let titles = load_title_list(c.paths.titles.as_deref().ok_or_else(|| missing_path("paths.titles"))?)?;
                let upstream = client(&c.upstream, self.cache())?;
                let fork = client(&c.fork, self.cache())?;
                let out = crawl(&upstream, &fork, &titles, c.workers)?;
                if self.views_fetched() {
                    let rows = fetch_views(&upstream, &titles, c.stats.window()?)?;
                    self.write(FETCHED_VIEWS, &to_jsonl(&rows)?)?;
                }
                self.write(PAGES, &to_jsonl(&out.records)?)?;
                self.write(CRAWL_MANIFEST, &to_json_pretty(&out.manifest)?)
            }
            Stage::Diff => {
                let records: Vec<PageRecord> = read_jsonl(&self.artifact(PAGES))?;
                let (diffs, report) = stages::run_diff(&records, c.diff.threshold);
                self.write(DIFFS, &to_jsonl(&diffs)?)?;
                self.write(DIFF_REPORT, &to_json_pretty(&report)?)
            }
            Stage::Stats => {
                let records: Vec<PageRecord> = read_jsonl(&self.artifact(PAGES))?;
                let revlog: Vec<RevisionLogEntry> = read_jsonl(
                    c.paths.revlog_upstream.as_deref().ok_or_else(|| missing_path("paths.revlog_upstream"))?,
                )?;
                let views_path = c.paths.views.clone().unwrap_or_else(|| self.artifact(FETCHED_VIEWS));
                let views = load_views(&views_path)?;
                let bootstrap = c.stats.bootstrap(Stage::Stats.seed(c.seed));
                let report = stages::run_stats(&records, &revlog, &views, c.stats.window()?, &bootstrap)?;
                self.write(STATS, &to_json_pretty(&report)?)
            }
            Stage::Analyze => {
                let records: Vec<PageRecord> = read_jsonl(&self.artifact(PAGES))?;
                let diffs: Vec<ContentDiff> = read_jsonl(&self.artifact(DIFFS))?;
                let up: Vec<RevisionLogEntry> = read_jsonl(
                    c.paths.revlog_upstream.as_deref().ok_or_else(|| missing_path("paths.revlog_upstream"))?,
                )?;
                let fork: Vec<RevisionLogEntry> =
                    read_jsonl(c.paths.revlog_fork.as_deref().ok_or_else(|| missing_path("paths.revlog_fork"))?)?;
                let geo = match &c.paths.geo {
                    Some(p) => load_geo(p)?,
                    None => Vec::new(),
                };
                let recognizer = recognizer(&c.analyze.recognizer, c.paths.gazetteer.as_deref())?;
                let mut bots = BotFilter::default().with_names(c.analyze.extra_bots.iter());
                bots.enabled = c.analyze.bot_filter;
                let analysis = stages::run_analyze(&AnalyzeInputs {
                    records: &records,
                    diffs: &diffs,
                    revlog_upstream: &up,
                    revlog_fork: &fork,
                    geo: &geo,
                    recognizer: recognizer.as_ref(),
                    bots,
                    office_hours: c.analyze.office_hours,
                    top_k: c.analyze.top_k,
                })?;
                let dir = self.report_dir();
                write_atomic(&dir.join("temporal.csv"), &report::temporal_csv(&analysis.heatmaps)?)?;
                write_atomic(&dir.join("geo.csv"), &report::geo_csv(&analysis.geo)?)?;
                write_atomic(&dir.join("categories.csv"), &report::categories_csv(&analysis.categories)?)?;
                write_atomic(&dir.join("references.csv"), &report::references_csv(&analysis.references)?)?;
                write_atomic(&dir.join("entities.csv"), &report::entities_csv(&analysis.entities)?)?;
                self.write(ANALYSIS, &to_json_pretty(&analysis)?)
            }
            Stage::Taxonomy => {
                let diffs: Vec<ContentDiff> = read_jsonl(&self.artifact(DIFFS))?;
                let templates = stages::load_templates(c.paths.templates.as_deref())?;
                let backend = backend(c, self.cache())?;
                let config = c.taxonomy.core_config(Stage::Taxonomy.seed(c.seed));
                let taxonomy = build_taxonomy(&diffs, backend.as_ref(), &templates, &config)
                    .map_err(|e| Error::Data(format!("taxonomy: {e}")))?;
                self.write(TAXONOMY, &to_json_pretty(&taxonomy)?)
            }
            Stage::Report => self.emit_report(),
        }
    }

    fn emit_report(&self) -> Result<()> {
        let records: Vec<PageRecord> = read_jsonl(&self.artifact(PAGES))?;
        let crawl: CrawlManifest = read_json(&self.artifact(CRAWL_MANIFEST))?;
        let diff: DiffReport = read_json(&self.artifact(DIFF_REPORT))?;
        let stats: StatsReport = read_json(&self.artifact(STATS))?;
        let analysis: Analysis = read_json(&self.artifact(ANALYSIS))?;
        let taxonomy: Option<Taxonomy> =
            if self.config.stages.taxonomy { Some(read_json(&self.artifact(TAXONOMY))?) } else { None };

        let dir = self.report_dir();
        let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for f in ANALYZE_REPORTS {
            let path = dir.join(f);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            files.insert(f.into(), bytes);
        }
        files.insert("stats.json".into(), to_json_pretty(&stats)?);
        files.insert("stats.csv".into(), report::stats_csv(&stats)?);
        if let Some(t) = &taxonomy {
            files.insert("taxonomy.json".into(), to_json_pretty(t)?);
            files.insert("taxonomy.csv".into(), report::taxonomy_csv(t)?);
        }
        let summary = report::summarize(&records, &crawl, &diff, &stats, &analysis, taxonomy.as_ref());
        files.insert("summary.json".into(), to_json_pretty(&summary)?);
        let manifest = report::bundle_manifest(self.config.hash(), &files);
        for f in ["stats.json", "stats.csv", "taxonomy.json", "taxonomy.csv", "summary.json"] {
            if let Some(bytes) = files.get(f) {
                write_atomic(&dir.join(f), bytes)?;
            }
        }
        write_atomic(&dir.join("MANIFEST.json"), &to_json_pretty(&manifest)?)
    }

    fn cache(&self) -> DiskCache {
        let default = self.config.paths.cache.clone().unwrap_or_else(|| self.config.paths.runs.join("cache"));
        DiskCache::from_env_or(default)
    }
}

fn missing_path(key: &str) -> Error {
    Error::Config(format!("{key} is required"))
}

/// Fixture endpoints are served in-process and bypass the cache.
pub fn client(endpoint: &WikiEndpoint, cache: DiskCache) -> Result<MediaWikiClient> {
    if let Some(path) = endpoint.base_url.strip_prefix(FIXTURE_SCHEME) {
        let wiki = FixtureWiki::load(Path::new(path))?;
        return MediaWikiClient::new(endpoint.clone(), Arc::new(wiki), None);
    }
    let transport = ReqwestTransport::new(Duration::from_secs(60))
        .map_err(|m| Error::Transport { endpoint: endpoint.label.clone(), message: m })?;
    MediaWikiClient::new(endpoint.clone(), Arc::new(transport), Some(cache))
}

fn http_transport() -> Result<Arc<dyn Transport>> {
    let t = ReqwestTransport::new(Duration::from_secs(120))
        .map_err(|m| Error::Transport { endpoint: "http".into(), message: m })?;
    Ok(Arc::new(t))
}

pub fn recognizer(config: &RecognizerConfig, gazetteer: Option<&Path>) -> Result<Box<dyn EntityRecognizer>> {
    Ok(match config {
        RecognizerConfig::Gazetteer => match gazetteer {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let g = Gazetteer::from_tsv(&text).map_err(|e| Error::Parse {
                    path: path.into(),
                    line: e.line,
                    message: e.message,
                })?;
                Box::new(g)
            }
            None => Box::new(Gazetteer::new()),
        },
        RecognizerConfig::Subprocess { command } => Box::new(
            SubprocessRecognizer::new(command).ok_or_else(|| Error::Config("recognizer command is empty".into()))?,
        ),
        RecognizerConfig::Http { url } => {
            Box::new(HttpRecognizer::new(url, http_transport()?, 5.0, RetryPolicy::new(5)))
        }
    })
}

/// The configured model backend; the HTTP one reads its key from
/// `FORKDIFF_LLM_KEY` and caches every answer.
pub fn backend(config: &PipelineConfig, cache: DiskCache) -> Result<Box<dyn LlmBackend>> {
    let t = &config.taxonomy;
    Ok(match t.backend {
        BackendKind::Mock => Box::new(MockBackend { dim: t.mock_dim }),
        BackendKind::Http => {
            let key = std::env::var(LLM_KEY_ENV)
                .ok()
                .filter(|k| !k.is_empty())
                .ok_or_else(|| Error::Config(format!("{LLM_KEY_ENV} is not set")))?;
            let http = HttpBackend::new(
                &t.base_url,
                &t.completion_model,
                &t.embedding_model,
                key,
                http_transport()?,
                t.rate_limit,
                RetryPolicy::new(5),
            );
            Box::new(CachedBackend::new(http, cache, &t.completion_model, &t.embedding_model))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_lists() {
        assert_eq!(parse_stages("report,crawl,diff").unwrap(), vec![Stage::Crawl, Stage::Diff, Stage::Report]);
        let err = parse_stages("crawl,plot").unwrap_err();
        assert!(err.to_string().contains("valid stages: crawl, diff"), "{err}");
        assert!(parse_stages(",").is_err());
    }

    #[test]
    fn stage_seeds_differ_and_are_stable() {
        let seeds: BTreeSet<u64> = Stage::ALL.iter().map(|s| s.seed(42)).collect();
        assert_eq!(seeds.len(), 6);
        assert_eq!(Stage::Stats.seed(42), Stage::Stats.seed(42));
        assert_ne!(Stage::Stats.seed(42), Stage::Stats.seed(43));
    }
}
