use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand};
use forkdiff::cache::DiskCache;
use forkdiff::config::{validate_config, BackendKind, PipelineConfig, TaxonomyParams};
use forkdiff::crawl::crawl;
use forkdiff::error::{Error, ExitCode, Result};
use forkdiff::io::{load_geo, load_views, read_jsonl, to_json_pretty, to_jsonl, write_atomic};
use forkdiff::llm::{CachedBackend, HttpBackend, MockBackend, LLM_KEY_ENV};
use forkdiff::mediawiki::WikiEndpoint;
use forkdiff::pipeline::{client, parse_stages, recognizer, Outcome, Pipeline, PlannedAction, Stage};
use forkdiff::report;
use forkdiff::stages::{self, AnalyzeInputs};
use forkdiff::transport::{ReqwestTransport, RetryPolicy};
use forkdiff_core::analytics::{BotFilter, OfficeHours};
use forkdiff_core::diff::{ContentDiff, SimilarityThreshold};
use forkdiff_core::lineage::PageRecord;
use forkdiff_core::stats::{BootstrapConfig, MonthWindow, RevisionLogEntry, YearMonth};
use forkdiff_core::taxonomy::{build_taxonomy, LlmBackend};

/// Compare a MediaWiki fork against its upstream.
#[derive(Debug, Parser)]
#[command(name = "forkdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify pages as duplicated, changed or missing on the fork.
    Crawl(CrawlArgs),
    /// Diff changed pages against their upstream parent revision.
    Diff(DiffArgs),
    /// Bootstrap relevance statistics per page status.
    Stats(StatsArgs),
    /// Temporal, geographic, category, reference and entity tables.
    Analyze(AnalyzeArgs),
    /// Build the taxonomy of changes.
    Taxonomy(TaxonomyArgs),
    /// Emit the report bundle of a configured run.
    Report(PipelineArgs),
    /// Run the configured pipeline.
    Run(RunArgs),
}

/// With `--config`, a stage subcommand runs that stage of the configured
/// pipeline and ignores its other flags.
#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Print the plan without running anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct ConfigMode {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, requires = "config")]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated subset of crawl,diff,stats,analyze,taxonomy,report.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Args)]
struct CrawlArgs {
    #[command(flatten)]
    mode: ConfigMode,
    #[arg(long, required_unless_present = "config")]
    upstream_api: Option<String>,
    #[arg(long, required_unless_present = "config")]
    fork_api: Option<String>,
    #[arg(long, required_unless_present = "config")]
    titles: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

#[derive(Debug, Args)]
struct DiffArgs {
    #[command(flatten)]
    mode: ConfigMode,
    #[arg(long, required_unless_present = "config")]
    pages: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    mode: ConfigMode,
    #[arg(long, required_unless_present = "config")]
    pages: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    revlog: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    views: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 1_000)]
    sample_size: usize,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// First month of the window, YYYY-MM.
    #[arg(long, default_value = "2022-01")]
    from: YearMonth,
    /// Last month of the window, YYYY-MM.
    #[arg(long, default_value = "2023-09")]
    to: YearMonth,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    mode: ConfigMode,
    #[arg(long, required_unless_present = "config")]
    pages: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    diffs: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    revlog_upstream: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    revlog_fork: Option<PathBuf>,
    #[arg(long)]
    geo: Option<PathBuf>,
    /// `surface<TAB>lemma<TAB>label` lines.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// Keep edits by bot accounts in the heatmaps.
    #[arg(long)]
    keep_bots: bool,
    /// Output directory.
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TaxonomyArgs {
    #[command(flatten)]
    mode: ConfigMode,
    #[arg(long, required_unless_present = "config")]
    diffs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 15)]
    k_max: usize,
    /// Skip the silhouette search.
    #[arg(long)]
    k: Option<usize>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Base URL of the chat-completion and embedding API.
    #[arg(long)]
    base_url: Option<String>,
    /// Response cache, unless FORKDIFF_CACHE_DIR is set.
    #[arg(long, default_value = ".forkdiff-cache")]
    cache: PathBuf,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
}

fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value.clone().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn run_configured(path: &Path, stages: Option<Vec<Stage>>, dry_run: bool) -> Result<()> {
    let config: PipelineConfig = validate_config(path)?;
    let pipeline = Pipeline::new(config);
    let stages = stages.unwrap_or_else(|| pipeline.default_stages());
    if dry_run {
        println!("run directory: {}", pipeline.run_dir.display());
        let plan = pipeline.plan(&stages);
        for (stage, action) in &plan {
            println!("{stage}: {action}");
        }
        if let Some((stage, PlannedAction::Blocked(why))) =
            plan.iter().find(|(_, a)| matches!(a, PlannedAction::Blocked(_)))
        {
            log::warn!("{stage} cannot run: {why}");
        }
        return Ok(());
    }
    for (stage, outcome) in pipeline.run(&stages)? {
        let what = match outcome {
            Outcome::Ran => "done",
            Outcome::Skipped => "up to date, skipped",
        };
        println!("{stage}: {what}");
    }
    println!("run directory: {}", pipeline.run_dir.display());
    Ok(())
}

fn stage_mode(mode: &ConfigMode, stage: Stage) -> Option<Result<()>> {
    mode.config.as_ref().map(|path| run_configured(path, Some(vec![stage]), mode.dry_run))
}

fn cmd_crawl(a: &CrawlArgs) -> Result<()> {
    if let Some(r) = stage_mode(&a.mode, Stage::Crawl) {
        return r;
    }
    let titles = forkdiff::io::load_title_list(&required(&a.titles, "titles")?)?;
    let cache = DiskCache::from_env_or(".forkdiff-cache");
    let upstream = client(&WikiEndpoint::new("upstream", &required(&a.upstream_api, "upstream-api")?), cache.clone())?;
    let fork = client(&WikiEndpoint::new("fork", &required(&a.fork_api, "fork-api")?), cache)?;
    let out_dir = required(&a.out, "out")?;
    let out = crawl(&upstream, &fork, &titles, a.workers)?;
    write_atomic(&out_dir.join("pages.jsonl"), &to_jsonl(&out.records)?)?;
    write_atomic(&out_dir.join("crawl.json"), &to_json_pretty(&out.manifest)?)?;
    for (status, n) in &out.manifest.counts {
        println!("{status}: {n}");
    }
    Ok(())
}

fn cmd_diff(a: &DiffArgs) -> Result<()> {
    if let Some(r) = stage_mode(&a.mode, Stage::Diff) {
        return r;
    }
    let threshold = SimilarityThreshold::new(a.threshold)
        .map_err(|_| Error::Config(format!("--threshold must be in (0, 1), got {}", a.threshold)))?;
    let records: Vec<PageRecord> = read_jsonl(&required(&a.pages, "pages")?)?;
    let (diffs, report) = stages::run_diff(&records, threshold);
    write_atomic(&required(&a.out, "out")?, &to_jsonl(&diffs)?)?;
    for s in &report.skipped {
        log::warn!("skipped {}: {}", s.title, s.reason);
    }
    println!("diffed {} pages, skipped {}", report.diffed, report.skipped.len());
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    if let Some(r) = stage_mode(&a.mode, Stage::Stats) {
        return r;
    }
    let window = MonthWindow::new(a.from, a.to).ok_or_else(|| Error::Config("--from is after --to".into()))?;
    let bootstrap = BootstrapConfig {
        n_resamples: a.resamples,
        sample_size: a.sample_size,
        confidence: a.confidence,
        seed: a.seed,
    };
    bootstrap.validate().map_err(|e| Error::Config(e.to_string()))?;
    let records: Vec<PageRecord> = read_jsonl(&required(&a.pages, "pages")?)?;
    let revlog: Vec<RevisionLogEntry> = read_jsonl(&required(&a.revlog, "revlog")?)?;
    let views = load_views(&required(&a.views, "views")?)?;
    let report = stages::run_stats(&records, &revlog, &views, window, &bootstrap)?;
    write_atomic(&required(&a.out, "out")?, &to_json_pretty(&report)?)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    if let Some(r) = stage_mode(&a.mode, Stage::Analyze) {
        return r;
    }
    if a.top_k == 0 {
        return Err(Error::Config("--top-k must be at least 1".into()));
    }
    let records: Vec<PageRecord> = read_jsonl(&required(&a.pages, "pages")?)?;
    let diffs: Vec<ContentDiff> = read_jsonl(&required(&a.diffs, "diffs")?)?;
    let up: Vec<RevisionLogEntry> = read_jsonl(&required(&a.revlog_upstream, "revlog-upstream")?)?;
    let fork: Vec<RevisionLogEntry> = read_jsonl(&required(&a.revlog_fork, "revlog-fork")?)?;
    let geo = match &a.geo {
        Some(p) => load_geo(p)?,
        None => Vec::new(),
    };
    let recognizer = recognizer(&forkdiff::config::RecognizerConfig::Gazetteer, a.gazetteer.as_deref())?;
    let bots = if a.keep_bots { BotFilter::default() } else { BotFilter::enabled() };
    let analysis = stages::run_analyze(&AnalyzeInputs {
        records: &records,
        diffs: &diffs,
        revlog_upstream: &up,
        revlog_fork: &fork,
        geo: &geo,
        recognizer: recognizer.as_ref(),
        bots,
        office_hours: OfficeHours::default(),
        top_k: a.top_k,
    })?;
    let dir = required(&a.out, "out")?;
    write_atomic(&dir.join("temporal.csv"), &report::temporal_csv(&analysis.heatmaps)?)?;
    write_atomic(&dir.join("geo.csv"), &report::geo_csv(&analysis.geo)?)?;
    write_atomic(&dir.join("categories.csv"), &report::categories_csv(&analysis.categories)?)?;
    write_atomic(&dir.join("references.csv"), &report::references_csv(&analysis.references)?)?;
    write_atomic(&dir.join("entities.csv"), &report::entities_csv(&analysis.entities)?)?;
    write_atomic(&dir.join("analysis.json"), &to_json_pretty(&analysis)?)
}

fn cmd_taxonomy(a: &TaxonomyArgs) -> Result<()> {
    if let Some(r) = stage_mode(&a.mode, Stage::Taxonomy) {
        return r;
    }
    let params = TaxonomyParams {
        backend: a.backend,
        k_min: a.k_min,
        k_max: a.k_max,
        fixed_k: a.k,
        base_url: a.base_url.clone().unwrap_or_else(|| TaxonomyParams::default().base_url),
        ..TaxonomyParams::default()
    };
    let config = params.core_config(a.seed);
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    let templates = stages::load_templates(a.templates.as_deref())?;
    let diffs: Vec<ContentDiff> = read_jsonl(&required(&a.diffs, "diffs")?)?;
    let backend: Box<dyn LlmBackend> = match a.backend {
        BackendKind::Mock => Box::new(MockBackend { dim: params.mock_dim }),
        BackendKind::Http => {
            let key = std::env::var(LLM_KEY_ENV)
                .ok()
                .filter(|k| !k.is_empty())
                .ok_or_else(|| Error::Config(format!("{LLM_KEY_ENV} is not set")))?;
            let transport = ReqwestTransport::new(std::time::Duration::from_secs(120))
                .map_err(|m| Error::Transport { endpoint: params.base_url.clone(), message: m })?;
            let http = HttpBackend::new(
                &params.base_url,
                &params.completion_model,
                &params.embedding_model,
                key,
                std::sync::Arc::new(transport),
                params.rate_limit,
                RetryPolicy::new(5),
            );
            let cache = DiskCache::from_env_or(&a.cache);
            Box::new(CachedBackend::new(http, cache, &params.completion_model, &params.embedding_model))
        }
    };
    let taxonomy = build_taxonomy(&diffs, backend.as_ref(), &templates, &config)
        .map_err(|e| Error::Data(format!("taxonomy: {e}")))?;
    for row in forkdiff_core::taxonomy::emit_taxonomy(&taxonomy) {
        println!("{:>5}  {:.4}  {}", row.size, row.size_fraction, row.name);
    }
    write_atomic(&required(&a.out, "out")?, &to_json_pretty(&taxonomy)?)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Crawl(a) => cmd_crawl(a),
        Command::Diff(a) => cmd_diff(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Taxonomy(a) => cmd_taxonomy(a),
        Command::Report(a) => run_configured(&a.config, Some(vec![Stage::Report]), a.dry_run),
        Command::Run(a) => {
            let stages = a.stages.as_deref().map(parse_stages).transpose()?;
            run_configured(&a.config, stages, a.dry_run)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Validation as i32 } else { ExitCode::Success as i32 };
            let _ = e.print();
            process::exit(code);
        }
    };
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        process::exit(e.exit_code() as i32);
    }
}
