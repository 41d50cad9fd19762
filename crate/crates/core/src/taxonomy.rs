//! Taxonomy of edits: summarise, embed, cluster, name, judge fit, correct.
//!
//! Model access goes through [`LlmBackend`]; nothing here performs IO. Calls
//! are issued sequentially in edit order, so a deterministic backend yields a
//! deterministic taxonomy.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, select_k, ClusterError, KMeansConfig, SelectKConfig};
use crate::diff::ContentDiff;
use crate::stats::{bootstrap_estimate, mix_seed, BootstrapConfig, BootstrapEstimate};
use crate::text::word_count;

pub const OTHER_NAME: &str = "Other changes";
pub const OTHER_DESCRIPTION: &str = "The edit does not fit any of the provided clusters.";

pub const SUMMARY_PROMPT: &str = concat!(
    "You will be provided with details regarding edit to the Wikipedia page.\n",
    "You need to deeply analyse the changes, define what was edited and provide a description of the changes.\n",
    "\n",
    "Provide a short summary and specific factual changes. \n",
    "Pay attention to details about adding/removing/changing characteristics.\n",
    "Avoid generalizations and provide specific examples.  (max {MAX_WORDS} words)\n",
    "Return the answer in JSON format with only \"desc\" field and the following structure:\n",
    "{{\n",
    "    \"desc\": \"string\"  # description of specific factual changes\n",
    "}}\n",
    "The edit to analyze will be provided in the <>: <{EDIT_STRING}>",
);

pub const FIT_PROMPT: &str = concat!(
    "You are provided with a specific edit to the Wikipedia page (defined in <>) along with possible cluster details (defined in ~~) to which the edit belongs.\n",
    "You need to analyse the edit and decide whether the edit fits the provided cluster or not.\n",
    "Provide ONLY a short answer (YES or NO).\n",
    "Edit summary: <{EDIT_SUMMARY}>\n",
    "Cluster details: ~{CLUSTER_DETAILS}~",
);

pub const REASSIGN_PROMPT: &str = concat!(
    "You are provided with a specific edit to the Wikipedia page (defined in <>).\n",
    "You need to reclassify the edit to the correct cluster based on the provided cluster details.\n",
    "Cluster details:\n",
    "{ALL_CLUSTERS_DETAILS}\n",
    "{OTHER_INDEX}. Other changes: The edit does not fit any of the provided clusters. (always use this option if the edit does not fit any of the provided clusters)\n",
    "\n",
    "Provide ONLY a short answer (cluster number).\n",
    "Edit summary: <{EDIT_SUMMARY}>",
);

pub const NAMING_PROMPT: &str = concat!(
    "You will be provided with a sample of summaries of edits to Wikipedia pages that belong to one cluster (defined in <>).\n",
    "Generate a short name (up to 4 words) and a brief description of the cluster.\n",
    "The description should outline the specific changes made within the edits, including examples of the editing tactics employed.\n",
    "Return the answer in JSON format with only \"name\" and \"description\" fields and the following structure:\n",
    "{{\n",
    "    \"name\": \"string\",\n",
    "    \"description\": \"string\"\n",
    "}}\n",
    "Edit summaries: <{EDIT_SUMMARIES}>",
);

/// The four prompt templates. Placeholders use `{NAME}`; `{{` and `}}` stand
/// for literal braces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub summary: String,
    pub fit: String,
    pub reassign: String,
    pub naming: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            summary: SUMMARY_PROMPT.into(),
            fit: FIT_PROMPT.into(),
            reassign: REASSIGN_PROMPT.into(),
            naming: NAMING_PROMPT.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateError {
    UnknownPlaceholder(String),
    UnbalancedBrace(usize),
}

impl fmt::Display for TemplateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateError::UnknownPlaceholder(name) => write!(f, "unknown placeholder {{{name}}}"),
            TemplateError::UnbalancedBrace(at) => write!(f, "unbalanced brace at byte {at}"),
        }
    }
}

impl core::error::Error for TemplateError {}

/// Substitute `{NAME}` placeholders.
pub fn render(template: &str, values: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    let mut offset = 0;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let consumed = if tail.starts_with("{{") {
            out.push('{');
            2
        } else if tail.starts_with("}}") {
            out.push('}');
            2
        } else if tail.starts_with('}') {
            return Err(TemplateError::UnbalancedBrace(offset + pos));
        } else {
            let close = tail.find('}').ok_or(TemplateError::UnbalancedBrace(offset + pos))?;
            let name = &tail[1..close];
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .ok_or_else(|| TemplateError::UnknownPlaceholder(name.into()))?;
            out.push_str(value.1);
            close + 1
        };
        rest = &tail[consumed..];
        offset += pos + consumed;
    }
    out.push_str(rest);
    Ok(out)
}

impl PromptTemplates {
    /// Render every template with dummy values to catch typos early.
    pub fn validate(&self) -> Result<(), TemplateError> {
        render(&self.summary, &[("MAX_WORDS", ""), ("EDIT_STRING", "")])?;
        render(&self.fit, &[("EDIT_SUMMARY", ""), ("CLUSTER_DETAILS", "")])?;
        render(&self.reassign, &[("ALL_CLUSTERS_DETAILS", ""), ("OTHER_INDEX", ""), ("EDIT_SUMMARY", "")])?;
        render(&self.naming, &[("EDIT_SUMMARIES", "")])?;
        Ok(())
    }
}

/// One edit flattened to a single labelled string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRepresentation {
    pub title: String,
    pub flat_text: String,
    pub eligible: bool,
}

/// Sentences, changed pairs, categories, tags and templates; media and
/// references are not covered and alone do not make an edit eligible.
pub fn flatten_edit(diff: &ContentDiff) -> EditRepresentation {
    let mut text = format!("TITLE: {}", diff.title);
    let mut covered = false;
    let mut section = |text: &mut String, name: &str, lines: Vec<String>| {
        if lines.is_empty() {
            return;
        }
        covered = true;
        text.push('\n');
        text.push_str(name);
        text.push(':');
        for line in lines {
            text.push('\n');
            text.push_str(&line);
        }
    };
    let items = |prefix: &str, xs: &mut dyn Iterator<Item = &String>| -> Vec<String> {
        xs.map(|x| format!("{prefix} {x}")).collect()
    };
    let signed = |added: &alloc::collections::BTreeSet<String>, removed: &alloc::collections::BTreeSet<String>| {
        let mut lines = items("+", &mut added.iter());
        lines.extend(items("-", &mut removed.iter()));
        lines
    };
    section(&mut text, "DELETED", items("-", &mut diff.deleted.iter()));
    section(&mut text, "ADDED", items("-", &mut diff.inserted.iter()));
    section(&mut text, "CHANGED", diff.changed.iter().map(|p| format!("- \"{}\" -> \"{}\"", p.old, p.new)).collect());
    section(&mut text, "CATEGORIES", signed(&diff.categories_added, &diff.categories_removed));
    section(&mut text, "TAGS", signed(&diff.tags_added, &diff.tags_removed));
    section(&mut text, "TEMPLATES", signed(&diff.templates_added, &diff.templates_removed));
    EditRepresentation { title: diff.title.clone(), flat_text: text, eligible: covered }
}

/// A completion request. `attempt` counts retries of the same prompt so a
/// caching backend does not replay a rejected answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Completion<'a> {
    pub prompt: &'a str,
    pub temperature: f64,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendError(pub String);

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model backend failed: {}", self.0)
    }
}

impl core::error::Error for BackendError {}

/// Text completion and embedding provider. Implementations must be
/// deterministic at temperature 0.
pub trait LlmBackend {
    fn complete(&self, request: &Completion<'_>) -> Result<String, BackendError>;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, request: &Completion<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        (**self).embed(texts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    Backend(BackendError),
    Template(TemplateError),
    Cluster(ClusterError),
    Embedding(String),
    InvalidConfig(&'static str),
}

impl fmt::Display for TaxonomyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaxonomyError::Backend(e) => e.fmt(f),
            TaxonomyError::Template(e) => write!(f, "prompt template: {e}"),
            TaxonomyError::Cluster(e) => write!(f, "clustering: {e}"),
            TaxonomyError::Embedding(m) => write!(f, "embedding: {m}"),
            TaxonomyError::InvalidConfig(m) => write!(f, "invalid taxonomy configuration: {m}"),
        }
    }
}

impl core::error::Error for TaxonomyError {}

impl From<BackendError> for TaxonomyError {
    fn from(e: BackendError) -> Self {
        TaxonomyError::Backend(e)
    }
}

impl From<TemplateError> for TaxonomyError {
    fn from(e: TemplateError) -> Self {
        TaxonomyError::Template(e)
    }
}

impl From<ClusterError> for TaxonomyError {
    fn from(e: ClusterError) -> Self {
        TaxonomyError::Cluster(e)
    }
}

/// Attempts for JSON answers: the first call plus three retries.
pub const JSON_ATTEMPTS: u32 = 4;
/// Attempts for YES/NO answers: the first call plus one retry.
pub const FIT_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SummaryOutcome {
    Summary { text: String, over_length: bool },
    Failed,
}

/// Pull the first JSON object out of a model answer, tolerating code fences
/// and surrounding prose.
fn json_object(answer: &str) -> Option<serde_json::Map<String, serde_json::Value>> {
    let start = answer.find('{')?;
    let end = answer.rfind('}')?;
    if end < start {
        return None;
    }
    match serde_json::from_str(&answer[start..=end]).ok()? {
        serde_json::Value::Object(map) => Some(map),
        _ => None,
    }
}

fn json_string(map: &serde_json::Map<String, serde_json::Value>, key: &str) -> Option<String> {
    let s = map.get(key)?.as_str()?.trim();
    (!s.is_empty()).then(|| s.to_string())
}

pub fn summarize_edit<B: LlmBackend + ?Sized>(
    rep: &EditRepresentation,
    backend: &B,
    templates: &PromptTemplates,
    max_words: usize,
) -> Result<SummaryOutcome, TaxonomyError> {
    let max = max_words.to_string();
    let prompt = render(&templates.summary, &[("MAX_WORDS", &max), ("EDIT_STRING", &rep.flat_text)])?;
    for attempt in 0..JSON_ATTEMPTS {
        let answer = backend.complete(&Completion { prompt: &prompt, temperature: 0.0, attempt })?;
        if let Some(text) = json_object(&answer).and_then(|m| json_string(&m, "desc")) {
            let over_length = word_count(&text) > max_words;
            return Ok(SummaryOutcome::Summary { text, over_length });
        }
    }
    Ok(SummaryOutcome::Failed)
}

/// Embed `texts` in batches, checking shape and restoring unit norm.
pub fn embed_summaries<B: LlmBackend + ?Sized>(
    texts: &[String],
    backend: &B,
    batch_size: usize,
) -> Result<Vec<Vec<f64>>, TaxonomyError> {
    if texts.is_empty() {
        return Err(TaxonomyError::Embedding("no texts to embed".into()));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(texts.len());
    for batch in texts.chunks(batch_size.max(1)) {
        let vectors = backend.embed(batch)?;
        if vectors.len() != batch.len() {
            return Err(TaxonomyError::Embedding(format!(
                "backend returned {} vectors for {} texts",
                vectors.len(),
                batch.len()
            )));
        }
        out.extend(vectors);
    }
    let dim = out[0].len();
    for (i, v) in out.iter_mut().enumerate() {
        if v.len() != dim {
            return Err(TaxonomyError::Embedding(format!("vector {i} has dimension {}, expected {dim}", v.len())));
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 || !norm.is_finite() {
            return Err(TaxonomyError::Embedding(format!("vector {i} has norm {norm}")));
        }
        if (norm - 1.0).abs() > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(out)
}

/// Name and describe a cluster from a seeded sample of its summaries.
/// Clusters smaller than `samples` are padded by drawing with replacement.
pub fn name_cluster<B: LlmBackend + ?Sized>(
    summaries: &[&str],
    backend: &B,
    templates: &PromptTemplates,
    samples: usize,
    seed: u64,
) -> Result<Option<(String, String)>, TaxonomyError> {
    if summaries.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<usize> = if summaries.len() >= samples {
        let mut idx = index::sample(&mut rng, summaries.len(), samples).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..samples).map(|_| rng.random_range(0..summaries.len())).collect()
    };
    let listing: Vec<String> =
        picked.iter().enumerate().map(|(i, &j)| format!("{}. {}", i + 1, summaries[j])).collect();
    let prompt = render(&templates.naming, &[("EDIT_SUMMARIES", &listing.join("\n"))])?;
    for attempt in 0..JSON_ATTEMPTS {
        let answer = backend.complete(&Completion { prompt: &prompt, temperature: 0.0, attempt })?;
        if let Some(map) = json_object(&answer) {
            if let (Some(name), Some(description)) = (json_string(&map, "name"), json_string(&map, "description")) {
                return Ok(Some((name, description)));
            }
        }
    }
    Ok(None)
}

/// `Some(true)` for YES, `Some(false)` for NO, `None` for anything else.
pub fn parse_fit(answer: &str) -> Option<bool> {
    let word: String =
        answer.trim_start_matches(|c: char| !c.is_alphanumeric()).chars().take_while(|c| c.is_alphanumeric()).collect();
    match word.to_uppercase().as_str() {
        "YES" => Some(true),
        "NO" => Some(false),
        _ => None,
    }
}

/// First integer in the answer.
pub fn parse_cluster_number(answer: &str) -> Option<usize> {
    let start = answer.find(|c: char| c.is_ascii_digit())?;
    let digits: String = answer[start..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

pub fn cluster_details(name: &str, description: &str) -> String {
    format!("{name}: {description}")
}

/// Ask whether a summary fits a cluster. Unparseable answers are retried
/// once and then count as NO; the flag reports that fallback.
pub fn judge_fit<B: LlmBackend + ?Sized>(
    summary: &str,
    details: &str,
    backend: &B,
    templates: &PromptTemplates,
) -> Result<(bool, bool), TaxonomyError> {
    let prompt = render(&templates.fit, &[("EDIT_SUMMARY", summary), ("CLUSTER_DETAILS", details)])?;
    for attempt in 0..FIT_ATTEMPTS {
        let answer = backend.complete(&Completion { prompt: &prompt, temperature: 0.0, attempt })?;
        if let Some(fit) = parse_fit(&answer) {
            return Ok((fit, false));
        }
    }
    Ok((false, true))
}

/// Edit-to-cluster fit rate: the exact YES fraction plus a bootstrap
/// estimate. `plus_minus` is the bootstrap standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRate {
    pub yes: usize,
    pub total: usize,
    pub rate: f64,
    pub plus_minus: f64,
    pub estimate: BootstrapEstimate,
}

pub fn fit_rate(judgements: &[bool], n_resamples: usize, seed: u64) -> Option<FitRate> {
    if judgements.is_empty() {
        return None;
    }
    let values: Vec<f64> = judgements.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
    let config = BootstrapConfig { n_resamples, sample_size: values.len().min(1000), confidence: 0.95, seed };
    let estimate = bootstrap_estimate(&values, &config).ok()?;
    let yes = judgements.iter().filter(|&&y| y).count();
    Some(FitRate {
        yes,
        total: judgements.len(),
        rate: yes as f64 / judgements.len() as f64,
        plus_minus: estimate.std_error,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyConfig {
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    /// Skip the silhouette search and use this k.
    pub fixed_k: Option<usize>,
    pub max_words: usize,
    pub naming_samples: usize,
    pub silhouette_sample: usize,
    pub max_iter: usize,
    pub n_init: usize,
    pub embed_batch: usize,
    pub bootstrap_resamples: usize,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        TaxonomyConfig {
            seed: 42,
            k_min: 2,
            k_max: 15,
            fixed_k: None,
            max_words: 40,
            naming_samples: 20,
            silhouette_sample: 5_000,
            max_iter: 300,
            n_init: 10,
            embed_batch: 100,
            bootstrap_resamples: 10_000,
        }
    }
}

impl TaxonomyConfig {
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(TaxonomyError::InvalidConfig("k range must satisfy 2 <= k_min <= k_max"));
        }
        if self.fixed_k == Some(0) {
            return Err(TaxonomyError::InvalidConfig("fixed_k must be at least 1"));
        }
        if self.max_words == 0 || self.naming_samples == 0 || self.silhouette_sample < 2 {
            return Err(TaxonomyError::InvalidConfig(
                "max_words, naming_samples and silhouette_sample must be positive",
            ));
        }
        if self.n_init == 0 || self.embed_batch == 0 || self.bootstrap_resamples == 0 {
            return Err(TaxonomyError::InvalidConfig("n_init, embed_batch and bootstrap_resamples must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyCluster {
    pub id: usize,
    pub name: String,
    pub description: String,
    /// Indices into [`Taxonomy::edits`].
    pub members: Vec<usize>,
    pub size_fraction: f64,
    pub ecfr_before: Option<FitRate>,
    pub ecfr_after: Option<FitRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditAssignment {
    pub title: String,
    pub summary: Option<String>,
    pub over_length: bool,
    /// Cluster from k-means; `None` when summarisation failed.
    pub initial_cluster: Option<usize>,
    pub cluster: usize,
    pub fit_before: Option<bool>,
    pub fit_after: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ineligible: usize,
    pub summary_failures: usize,
    pub over_length: usize,
    pub naming_failures: usize,
    pub fit_parse_failures: usize,
    pub reassign_parse_failures: usize,
    /// Set when k could not be selected and all summaries form one cluster.
    pub single_cluster_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    /// Named clusters by id, followed by "Other changes" with id `k`.
    pub clusters: Vec<TaxonomyCluster>,
    pub edits: Vec<EditAssignment>,
    pub silhouette: Vec<(usize, Option<f64>)>,
    pub overall_ecfr_before: Option<f64>,
    /// Members moved to "Other changes" by correction count as fitting.
    pub overall_ecfr_after: Option<f64>,
    /// Post-correction rate over members of named clusters only.
    pub overall_ecfr_after_named: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl Taxonomy {
    pub fn other(&self) -> Option<&TaxonomyCluster> {
        self.clusters.last()
    }
}

const SALT_NAMING: u64 = 0x4e41_4d45;
const SALT_FIT_BEFORE: u64 = 0x4643_5242;
const SALT_FIT_AFTER: u64 = 0x4643_5241;

/// Run the whole taxonomy pipeline over a corpus of diffs.
pub fn build_taxonomy<B: LlmBackend + ?Sized>(
    diffs: &[ContentDiff],
    backend: &B,
    templates: &PromptTemplates,
    config: &TaxonomyConfig,
) -> Result<Taxonomy, TaxonomyError> {
    config.validate()?;
    templates.validate()?;
    let mut diag = Diagnostics::default();

    let mut edits: Vec<EditAssignment> = Vec::new();
    for diff in diffs {
        let rep = flatten_edit(diff);
        if !rep.eligible {
            diag.ineligible += 1;
            continue;
        }
        let (summary, over_length) = match summarize_edit(&rep, backend, templates, config.max_words)? {
            SummaryOutcome::Summary { text, over_length } => (Some(text), over_length),
            SummaryOutcome::Failed => {
                diag.summary_failures += 1;
                (None, false)
            }
        };
        diag.over_length += usize::from(over_length);
        edits.push(EditAssignment {
            title: rep.title,
            summary,
            over_length,
            initial_cluster: None,
            cluster: 0,
            fit_before: None,
            fit_after: None,
        });
    }

    let summarized: Vec<usize> = (0..edits.len()).filter(|&i| edits[i].summary.is_some()).collect();
    let texts: Vec<String> = summarized.iter().filter_map(|&i| edits[i].summary.clone()).collect();
    let (labels, silhouette) = if texts.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let vectors = embed_summaries(&texts, backend, config.embed_batch)?;
        cluster_labels(&vectors, config, &mut diag)?
    };
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let other = k;
    for (&i, &label) in summarized.iter().zip(&labels) {
        edits[i].initial_cluster = Some(label);
        edits[i].cluster = label;
    }
    for e in edits.iter_mut().filter(|e| e.summary.is_none()) {
        e.cluster = other;
    }

    let mut names: Vec<(String, String)> = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<&str> = summarized
            .iter()
            .filter(|&&i| edits[i].cluster == c)
            .filter_map(|&i| edits[i].summary.as_deref())
            .collect();
        let seed = mix_seed(config.seed, SALT_NAMING ^ c as u64);
        match name_cluster(&members, backend, templates, config.naming_samples, seed)? {
            Some(pair) => names.push(pair),
            None => {
                diag.naming_failures += 1;
                names.push((format!("Cluster {c}"), String::new()));
            }
        }
    }
    let details: Vec<String> = names.iter().map(|(n, d)| cluster_details(n, d)).collect();

    for &i in &summarized {
        let summary = edits[i].summary.clone().unwrap_or_default();
        let (fit, fallback) = judge_fit(&summary, &details[edits[i].cluster], backend, templates)?;
        diag.fit_parse_failures += usize::from(fallback);
        edits[i].fit_before = Some(fit);
    }

    let all_details: Vec<String> = details.iter().enumerate().map(|(c, d)| format!("{c}. {d}")).collect();
    let all_details = all_details.join("\n");
    let other_index = other.to_string();
    for &i in &summarized {
        if edits[i].fit_before != Some(false) {
            edits[i].fit_after = edits[i].fit_before;
            continue;
        }
        let summary = edits[i].summary.clone().unwrap_or_default();
        let prompt = render(
            &templates.reassign,
            &[("ALL_CLUSTERS_DETAILS", &all_details), ("OTHER_INDEX", &other_index), ("EDIT_SUMMARY", &summary)],
        )?;
        let answer = backend.complete(&Completion { prompt: &prompt, temperature: 0.0, attempt: 0 })?;
        let target = match parse_cluster_number(&answer).filter(|&c| c <= other) {
            Some(c) => c,
            None => {
                diag.reassign_parse_failures += 1;
                other
            }
        };
        let previous = edits[i].cluster;
        edits[i].cluster = target;
        edits[i].fit_after = if target == other {
            Some(true)
        } else if target == previous {
            Some(false)
        } else {
            let (fit, fallback) = judge_fit(&summary, &details[target], backend, templates)?;
            diag.fit_parse_failures += usize::from(fallback);
            Some(fit)
        };
    }

    let total = edits.len();
    let mut clusters = Vec::with_capacity(k + 1);
    for c in 0..=other {
        let members: Vec<usize> = (0..total).filter(|&i| edits[i].cluster == c).collect();
        let (name, description) =
            names.get(c).cloned().unwrap_or_else(|| (OTHER_NAME.to_string(), OTHER_DESCRIPTION.to_string()));
        let (ecfr_before, ecfr_after) = if c == other {
            (None, None)
        } else {
            let before: Vec<bool> = summarized
                .iter()
                .filter(|&&i| edits[i].initial_cluster == Some(c))
                .filter_map(|&i| edits[i].fit_before)
                .collect();
            let after: Vec<bool> = members.iter().filter_map(|&i| edits[i].fit_after).collect();
            (
                fit_rate(&before, config.bootstrap_resamples, mix_seed(config.seed, SALT_FIT_BEFORE ^ c as u64)),
                fit_rate(&after, config.bootstrap_resamples, mix_seed(config.seed, SALT_FIT_AFTER ^ c as u64)),
            )
        };
        clusters.push(TaxonomyCluster {
            id: c,
            name,
            description,
            size_fraction: if total == 0 { 0.0 } else { members.len() as f64 / total as f64 },
            members,
            ecfr_before,
            ecfr_after,
        });
    }
    if total == 0 {
        clusters.clear();
    }

    let rate = |xs: &mut dyn Iterator<Item = bool>| {
        let (mut yes, mut n) = (0usize, 0usize);
        for x in xs {
            yes += usize::from(x);
            n += 1;
        }
        (n > 0).then(|| yes as f64 / n as f64)
    };
    let overall_ecfr_before = rate(&mut summarized.iter().filter_map(|&i| edits[i].fit_before));
    let overall_ecfr_after = rate(&mut summarized.iter().filter_map(|&i| edits[i].fit_after));
    let overall_ecfr_after_named =
        rate(&mut summarized.iter().filter(|&&i| edits[i].cluster != other).filter_map(|&i| edits[i].fit_after));

    Ok(Taxonomy {
        clusters,
        edits,
        silhouette,
        overall_ecfr_before,
        overall_ecfr_after,
        overall_ecfr_after_named,
        diagnostics: diag,
    })
}

type Labels = (Vec<usize>, Vec<(usize, Option<f64>)>);

/// k-means labels for the embedded summaries, renumbered densely. Inputs too
/// small or too uniform for a silhouette search form a single cluster.
fn cluster_labels(
    vectors: &[Vec<f64>],
    config: &TaxonomyConfig,
    diag: &mut Diagnostics,
) -> Result<Labels, TaxonomyError> {
    let n = vectors.len();
    let single = |diag: &mut Diagnostics, reason: String| {
        diag.single_cluster_reason = Some(reason);
        (vec![0; n], Vec::new())
    };
    let (raw, scores) = match config.fixed_k {
        Some(1) => return Ok(single(diag, "k fixed to 1".into())),
        Some(k) => {
            let k = k.min(n);
            if k < 2 {
                return Ok(single(diag, format!("{n} summaries")));
            }
            let km = kmeans(
                vectors,
                &KMeansConfig {
                    k,
                    seed: mix_seed(config.seed, k as u64),
                    max_iter: config.max_iter,
                    n_init: config.n_init,
                },
            )?;
            (km.labels, Vec::new())
        }
        None => {
            let k_max = config.k_max.min(n.saturating_sub(1));
            if k_max < config.k_min {
                return Ok(single(diag, format!("{n} summaries are too few for k >= {}", config.k_min)));
            }
            let select = SelectKConfig {
                k_min: config.k_min,
                k_max,
                seed: config.seed,
                max_sample: config.silhouette_sample,
                max_iter: config.max_iter,
                n_init: config.n_init,
            };
            match select_k(vectors, &select) {
                Ok(sel) => (sel.clustering.labels, sel.scores),
                Err(ClusterError::Degenerate) => {
                    return Ok(single(diag, "all summary embeddings are identical".into()))
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let mut dense: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &raw {
        let next = dense.len();
        dense.entry(l).or_insert(next);
    }
    Ok((raw.iter().map(|l| dense[l]).collect(), scores))
}

/// One row of the final taxonomy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyRow {
    pub id: usize,
    pub name: String,
    pub description: String,
    pub size: usize,
    pub size_fraction: f64,
}

/// Rows sorted by size (largest first, ties by id) with "Other changes" last.
pub fn emit_taxonomy(taxonomy: &Taxonomy) -> Vec<TaxonomyRow> {
    let Some((other, named)) = taxonomy.clusters.split_last() else {
        return Vec::new();
    };
    let mut rows: Vec<TaxonomyRow> = named.iter().map(row).collect();
    rows.sort_by(|a, b| b.size.cmp(&a.size).then(a.id.cmp(&b.id)));
    rows.push(row(other));
    rows
}

fn row(c: &TaxonomyCluster) -> TaxonomyRow {
    TaxonomyRow {
        id: c.id,
        name: c.name.clone(),
        description: c.description.clone(),
        size: c.members.len(),
        size_fraction: c.size_fraction,
    }
}
