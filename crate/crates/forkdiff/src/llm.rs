//! Model backends: an OpenAI-compatible HTTP client, a disk-caching wrapper
//! and a deterministic offline mock.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::Utc;
use forkdiff_core::taxonomy::{BackendError, Completion, LlmBackend};
use serde_json::{json, Value};

use crate::cache::{CacheEntry, DiskCache};
use crate::io::sha256_hex;
use crate::transport::{send_with_retry, HttpRequest, RateLimiter, RetryPolicy, Transport};

pub const LLM_KEY_ENV: &str = "FORKDIFF_LLM_KEY";
pub const DEFAULT_COMPLETION_MODEL: &str = "gpt-4o-mini-2024-07-18";
pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-small";

pub struct HttpBackend {
    base_url: String,
    completion_model: String,
    embedding_model: String,
    key: String,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn new(
        base_url: &str,
        completion_model: &str,
        embedding_model: &str,
        key: String,
        transport: Arc<dyn Transport>,
        requests_per_second: f64,
        retry: RetryPolicy,
    ) -> Self {
        HttpBackend {
            base_url: base_url.trim_end_matches('/').into(),
            completion_model: completion_model.into(),
            embedding_model: embedding_model.into(),
            key,
            transport,
            limiter: RateLimiter::new(requests_per_second),
            retry,
        }
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, BackendError> {
        let mut request = HttpRequest::post_json(format!("{}/{path}", self.base_url), body.to_string());
        request.headers.push(("Authorization".into(), format!("Bearer {}", self.key)));
        let response =
            send_with_retry(self.transport.as_ref(), &self.limiter, &self.retry, &request).map_err(BackendError)?;
        if response.status != 200 {
            return Err(BackendError(format!("{path}: HTTP {}", response.status)));
        }
        serde_json::from_str(&response.body).map_err(|e| BackendError(format!("{path}: invalid JSON: {e}")))
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &Completion<'_>) -> Result<String, BackendError> {
        let body = json!({
            "model": self.completion_model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let value = self.post("chat/completions", body)?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError("chat/completions: response lacks choices[0].message.content".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let value = self.post("embeddings", json!({"model": self.embedding_model, "input": texts}))?;
        let data = value
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError("embeddings: response lacks data".into()))?;
        let mut indexed: Vec<(u64, Vec<f64>)> = Vec::with_capacity(data.len());
        for (i, item) in data.iter().enumerate() {
            let index = item.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
            let vector = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| BackendError(format!("embeddings: item {i} lacks an embedding")))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| BackendError(format!("embeddings: item {i} is not numeric"))))
                .collect::<Result<Vec<f64>, _>>()?;
            indexed.push((index, vector));
        }
        indexed.sort_by_key(|(i, _)| *i);
        Ok(indexed.into_iter().map(|(_, v)| v).collect())
    }
}

/// Caches completions by (model, prompt hash, temperature, attempt) and
/// embeddings per (model, text).
pub struct CachedBackend<B> {
    inner: B,
    cache: DiskCache,
    completion_model: String,
    embedding_model: String,
}

impl<B: LlmBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: DiskCache, completion_model: &str, embedding_model: &str) -> Self {
        CachedBackend {
            inner,
            cache,
            completion_model: completion_model.into(),
            embedding_model: embedding_model.into(),
        }
    }

    fn store(&self, namespace: &str, request: String, body: String) -> Result<(), BackendError> {
        let entry = CacheEntry { request, fetched_at: Utc::now(), status: 200, body };
        self.cache.put(namespace, &entry).map_err(|e| BackendError(format!("cache: {e}")))
    }
}

impl<B: LlmBackend> LlmBackend for CachedBackend<B> {
    fn complete(&self, request: &Completion<'_>) -> Result<String, BackendError> {
        let namespace = format!("completion-{}", self.completion_model);
        let key = format!("{}|t={}|a={}", sha256_hex(request.prompt.as_bytes()), request.temperature, request.attempt);
        if let Some(entry) = self.cache.get(&namespace, &key) {
            return Ok(entry.body);
        }
        let answer = self.inner.complete(request)?;
        self.store(&namespace, key, answer.clone())?;
        Ok(answer)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        let namespace = format!("embedding-{}", self.embedding_model);
        let keys: Vec<String> = texts.iter().map(|t| sha256_hex(t.as_bytes())).collect();
        let mut out: Vec<Option<Vec<f64>>> = keys
            .iter()
            .map(|k| self.cache.get(&namespace, k).and_then(|e| serde_json::from_str(&e.body).ok()))
            .collect();
        let todo: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !todo.is_empty() {
            let batch: Vec<String> = todo.iter().map(|&i| texts[i].clone()).collect();
            let vectors = self.inner.embed(&batch)?;
            if vectors.len() != batch.len() {
                return Err(BackendError(format!(
                    "backend returned {} vectors for {} texts",
                    vectors.len(),
                    batch.len()
                )));
            }
            for (&i, v) in todo.iter().zip(vectors) {
                let body = serde_json::to_string(&v).map_err(|e| BackendError(e.to_string()))?;
                self.store(&namespace, keys[i].clone(), body)?;
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.unwrap_or_default()).collect())
    }
}

/// Offline backend that understands the default prompt templates.
///
/// Summaries list the edit's operations; embeddings hash summary words into
/// `dim` buckets; names are the most frequent words of the sampled
/// summaries; an edit fits a cluster when it shares a word with its name.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub dim: usize,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend { dim: 64 }
    }
}

const STOPWORDS: &[&str] =
    &["the", "and", "for", "with", "from", "that", "this", "was", "were", "are", "into", "text", "about"];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 3)
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn between<'a>(text: &'a str, open: &str, close: char) -> Option<&'a str> {
    let start = text.rfind(open)? + open.len();
    let end = text[start..].rfind(close)? + start;
    Some(&text[start..end])
}

fn first_words(s: &str, n: usize) -> String {
    s.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

impl MockBackend {
    fn summarize(prompt: &str) -> String {
        let max_words: usize = between(prompt, "(max ", ' ').and_then(|s| s.parse().ok()).unwrap_or(40);
        let edit = between(prompt, "<", '>').unwrap_or_default();
        let mut parts = Vec::new();
        let mut section = "";
        for line in edit.lines() {
            if let Some(name) = line.strip_suffix(':').filter(|l| l.chars().all(|c| c.is_ascii_uppercase())) {
                section = name;
                continue;
            }
            let (sign, item) = match line.split_once(' ') {
                Some((s, rest)) if s == "+" || s == "-" => (s, rest),
                _ => continue,
            };
            let verb = if sign == "+" { "added" } else { "removed" };
            let part = match section {
                "DELETED" => format!("deleted sentence {}", first_words(item, 6)),
                "ADDED" => format!("added sentence {}", first_words(item, 6)),
                "CHANGED" => match item.split_once("\" -> \"") {
                    Some((old, new)) => {
                        let old_words: BTreeSet<String> = words(old).into_iter().collect();
                        let new_words: BTreeSet<String> = words(new).into_iter().collect();
                        let gone: Vec<_> = old_words.difference(&new_words).cloned().collect();
                        let came: Vec<_> = new_words.difference(&old_words).cloned().collect();
                        format!("changed wording {} to {}", gone.join(" "), came.join(" "))
                    }
                    None => continue,
                },
                "CATEGORIES" => format!("{verb} category {item}"),
                "TAGS" => format!("{verb} tag {item}"),
                "TEMPLATES" => format!("{verb} template {}", item.split('|').next().unwrap_or(item)),
                _ => continue,
            };
            parts.push(part);
        }
        let desc = if parts.is_empty() { "no content change".to_string() } else { parts.join("; ") };
        json!({"desc": first_words(&desc, max_words)}).to_string()
    }

    fn name(prompt: &str) -> String {
        let listing = between(prompt, "Edit summaries: <", '>').unwrap_or_default();
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for line in listing.lines() {
            let text = line.split_once(". ").map_or(line, |(_, t)| t);
            for w in words(text).into_iter().collect::<BTreeSet<_>>() {
                if w.chars().count() >= 4 {
                    *freq.entry(w).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let top: Vec<String> = ranked.into_iter().take(3).map(|(w, _)| w).collect();
        let name = top
            .iter()
            .map(|w| {
                let mut c = w.chars();
                c.next().map(|f| f.to_uppercase().chain(c).collect::<String>()).unwrap_or_default()
            })
            .collect::<Vec<_>>()
            .join(" ");
        let name = if name.is_empty() { "Miscellaneous".to_string() } else { name };
        json!({"name": name, "description": format!("Edits that mostly involve: {}.", top.join(", "))}).to_string()
    }

    fn fit(prompt: &str) -> String {
        let summary = between(prompt, "Edit summary: <", '>').unwrap_or_default();
        let details = between(prompt, "Cluster details: ~", '~').unwrap_or_default();
        let name = details.split(':').next().unwrap_or_default();
        let summary_words: BTreeSet<String> = words(summary).into_iter().collect();
        let fits = words(name).iter().any(|w| summary_words.contains(w));
        if fits { "YES" } else { "NO" }.to_string()
    }

    fn reassign(prompt: &str) -> String {
        let summary = between(prompt, "Edit summary: <", '>').unwrap_or_default();
        let summary_words: BTreeSet<String> = words(summary).into_iter().collect();
        let mut best: Option<(usize, usize)> = None;
        let mut other = 0;
        for line in prompt.lines() {
            let Some((num, rest)) = line.split_once(". ") else { continue };
            let Ok(num) = num.trim().parse::<usize>() else { continue };
            if rest.starts_with("Other changes") {
                other = num;
                continue;
            }
            let name = rest.split(':').next().unwrap_or_default();
            let overlap = words(name).iter().filter(|w| summary_words.contains(*w)).count();
            if overlap > 0 && best.is_none_or(|(_, o)| overlap > o) {
                best = Some((num, overlap));
            }
        }
        best.map_or(other, |(n, _)| n).to_string()
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, request: &Completion<'_>) -> Result<String, BackendError> {
        let p = request.prompt;
        Ok(if p.contains("(YES or NO)") {
            Self::fit(p)
        } else if p.contains("(cluster number)") {
            Self::reassign(p)
        } else if p.contains("Edit summaries: <") {
            Self::name(p)
        } else {
            Self::summarize(p)
        })
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts
            .iter()
            .map(|t| {
                let dim = self.dim.max(1);
                let mut v = vec![0.0; dim];
                for w in words(t) {
                    let h = fnv1a(&w);
                    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                    v[(h % dim as u64) as usize] += sign;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    v[0] = 1.0;
                } else {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::HttpResponse;
    use forkdiff_core::taxonomy::{render, PromptTemplates, FIT_PROMPT, REASSIGN_PROMPT, SUMMARY_PROMPT};
    use std::sync::Mutex;

    fn ask(b: &impl LlmBackend, prompt: &str) -> String {
        b.complete(&Completion { prompt, temperature: 0.0, attempt: 0 }).unwrap()
    }

    #[test]
    fn mock_summarises_operations() {
        let edit = "TITLE: Medal\nCATEGORIES:\n- Articles with edit notes about caution when editing";
        let prompt = render(SUMMARY_PROMPT, &[("MAX_WORDS", "40"), ("EDIT_STRING", edit)]).unwrap();
        assert_eq!(
            ask(&MockBackend::default(), &prompt),
            r#"{"desc":"removed category Articles with edit notes about caution when editing"}"#
        );
    }

    #[test]
    fn mock_fit_and_reassign() {
        let m = MockBackend::default();
        let fit =
            render(FIT_PROMPT, &[("EDIT_SUMMARY", "removed category X"), ("CLUSTER_DETAILS", "Category Removed: d")])
                .unwrap();
        assert_eq!(ask(&m, &fit), "YES");
        let fit =
            render(FIT_PROMPT, &[("EDIT_SUMMARY", "changed wording"), ("CLUSTER_DETAILS", "Category Removed: d")])
                .unwrap();
        assert_eq!(ask(&m, &fit), "NO");
        let details = "0. Category Removed: a\n1. Wording Changed: b";
        let re = |summary: &str| {
            render(
                REASSIGN_PROMPT,
                &[("ALL_CLUSTERS_DETAILS", details), ("OTHER_INDEX", "2"), ("EDIT_SUMMARY", summary)],
            )
            .unwrap()
        };
        assert_eq!(ask(&m, &re("changed wording sundays")), "1");
        assert_eq!(ask(&m, &re("added template")), "2");
        PromptTemplates::default().validate().unwrap();
    }

    #[test]
    fn mock_embeddings_are_unit_and_deterministic() {
        let m = MockBackend { dim: 16 };
        let texts = vec!["removed category a".to_string(), String::new()];
        let a = m.embed(&texts).unwrap();
        assert_eq!(a, m.embed(&texts).unwrap());
        for v in &a {
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    struct Recorder {
        requests: Mutex<Vec<HttpRequest>>,
        response: String,
    }

    impl Transport for Recorder {
        fn send(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
            self.requests.lock().unwrap().push(request.clone());
            Ok(HttpResponse { status: 200, body: self.response.clone() })
        }
    }

    fn http(response: Value) -> (Arc<Recorder>, HttpBackend) {
        let rec = Arc::new(Recorder { requests: Mutex::new(Vec::new()), response: response.to_string() });
        let backend = HttpBackend::new(
            "https://llm.example/v1/",
            DEFAULT_COMPLETION_MODEL,
            DEFAULT_EMBEDDING_MODEL,
            "k".into(),
            rec.clone(),
            1e6,
            RetryPolicy::new(0),
        );
        (rec, backend)
    }

    #[test]
    fn http_wire_format() {
        let (rec, b) = http(json!({"choices": [{"message": {"content": "YES"}}]}));
        assert_eq!(ask(&b, "hi"), "YES");
        let req = rec.requests.lock().unwrap()[0].clone();
        assert_eq!(req.url, "https://llm.example/v1/chat/completions");
        let body: Value = serde_json::from_str(req.body.as_deref().unwrap()).unwrap();
        assert_eq!(body["model"], DEFAULT_COMPLETION_MODEL);
        assert_eq!(body["temperature"], 0.0);
        assert!(req.headers.contains(&("Authorization".into(), "Bearer k".into())));

        let (_, b) =
            http(json!({"data": [{"index": 1, "embedding": [0.0, 1.0]}, {"index": 0, "embedding": [1.0, 0.0]}]}));
        assert_eq!(b.embed(&["a".into(), "b".into()]).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn cache_serves_repeats_and_keys_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let (rec, inner) = http(json!({"choices": [{"message": {"content": "NO"}}]}));
        let b = CachedBackend::new(inner, DiskCache::new(dir.path()), "m", "e");
        assert_eq!(ask(&b, "p"), "NO");
        assert_eq!(ask(&b, "p"), "NO");
        assert_eq!(rec.requests.lock().unwrap().len(), 1);
        b.complete(&Completion { prompt: "p", temperature: 0.0, attempt: 1 }).unwrap();
        assert_eq!(rec.requests.lock().unwrap().len(), 2);
    }
}
