//! MediaWiki Action API client and an in-process fixture wiki.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use forkdiff_core::analytics::BotFilter;
use forkdiff_core::lineage::RevisionMeta;
use forkdiff_core::stats::YearMonth;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cache::{CacheEntry, DiskCache};
use crate::error::{Error, Result};
use crate::transport::{send_with_retry, HttpRequest, HttpResponse, RateLimiter, RetryPolicy, Transport};

pub const HISTORY_PAGE_SIZE: u32 = 500;

/// Per-article monthly pageviews in the Wikimedia REST layout:
/// `{base_url}/per-article/{project}/all-access/user/{title}/monthly/{start}/{end}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageviewsApi {
    pub base_url: String,
    pub project: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WikiEndpoint {
    pub base_url: String,
    pub label: String,
    #[serde(default = "default_rate_limit")]
    pub rate_limit: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub pageviews: Option<PageviewsApi>,
}

fn default_rate_limit() -> f64 {
    5.0
}

fn default_max_retries() -> u32 {
    5
}

impl WikiEndpoint {
    pub fn new(label: &str, base_url: &str) -> Self {
        WikiEndpoint {
            base_url: base_url.into(),
            label: label.into(),
            rate_limit: default_rate_limit(),
            max_retries: default_max_retries(),
            pageviews: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_url.trim().is_empty() {
            return Err(Error::Config(format!("endpoint `{}`: base_url is empty", self.label)));
        }
        if !(self.rate_limit > 0.0 && self.rate_limit.is_finite()) {
            return Err(Error::Config(format!(
                "endpoint `{}`: rate_limit must be a positive number, got {}",
                self.label, self.rate_limit
            )));
        }
        Ok(())
    }
}

/// Outcome of a page-level request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fetched<T> {
    Found(T),
    /// Deleted, never existed (HTTP 404 or API `missing`).
    Missing,
    /// Access refused (HTTP 403).
    Blocked,
}

impl<T> Fetched<T> {
    pub fn found(self) -> Option<T> {
        match self {
            Fetched::Found(t) => Some(t),
            _ => None,
        }
    }
}

pub struct MediaWikiClient {
    endpoint: WikiEndpoint,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    retry: RetryPolicy,
    cache: Option<DiskCache>,
    bots: BotFilter,
    latest_fetch: Mutex<Option<DateTime<Utc>>>,
}

impl MediaWikiClient {
    pub fn new(endpoint: WikiEndpoint, transport: Arc<dyn Transport>, cache: Option<DiskCache>) -> Result<Self> {
        endpoint.validate()?;
        Ok(MediaWikiClient {
            limiter: RateLimiter::new(endpoint.rate_limit),
            retry: RetryPolicy::new(endpoint.max_retries),
            endpoint,
            transport,
            cache,
            bots: BotFilter::enabled(),
            latest_fetch: Mutex::new(None),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &WikiEndpoint {
        &self.endpoint
    }

    /// Newest fetch time among the responses this client has used, cached or
    /// not. A crawl served entirely from cache reports the original time.
    pub fn latest_fetch(&self) -> Option<DateTime<Utc>> {
        *self.latest_fetch.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn transport_error(&self, message: impl Into<String>) -> Error {
        Error::Transport { endpoint: self.endpoint.label.clone(), message: message.into() }
    }

    fn send(&self, request: HttpRequest) -> Result<HttpResponse> {
        let canonical = serde_json::to_string(&(&request.url, &request.query)).expect("strings serialize");
        let entry = match self.cache.as_ref().and_then(|c| c.get(&self.endpoint.label, &canonical)) {
            Some(entry) => entry,
            None => {
                let response = send_with_retry(self.transport.as_ref(), &self.limiter, &self.retry, &request)
                    .map_err(|m| self.transport_error(m))?;
                let entry = CacheEntry {
                    request: canonical,
                    fetched_at: Utc::now(),
                    status: response.status,
                    body: response.body,
                };
                if let Some(cache) = &self.cache {
                    if matches!(entry.status, 200 | 403 | 404) {
                        cache.put(&self.endpoint.label, &entry)?;
                    }
                }
                entry
            }
        };
        let mut latest = self.latest_fetch.lock().unwrap_or_else(|e| e.into_inner());
        *latest = Some(latest.map_or(entry.fetched_at, |t| t.max(entry.fetched_at)));
        Ok(HttpResponse { status: entry.status, body: entry.body })
    }

    fn query(&self, params: &[(&str, String)]) -> Result<Fetched<Value>> {
        let mut query: Vec<(String, String)> = vec![
            ("action".into(), "query".into()),
            ("format".into(), "json".into()),
            ("formatversion".into(), "2".into()),
        ];
        query.extend(params.iter().map(|(k, v)| (k.to_string(), v.clone())));
        query.sort();
        let response = self.send(HttpRequest::get(&self.endpoint.base_url, query))?;
        match response.status {
            200 => {}
            403 => return Ok(Fetched::Blocked),
            404 => return Ok(Fetched::Missing),
            s => return Err(self.transport_error(format!("unexpected HTTP {s}"))),
        }
        let value: Value =
            serde_json::from_str(&response.body).map_err(|e| self.transport_error(format!("invalid JSON: {e}")))?;
        if let Some(err) = value.get("error") {
            let code = err.get("code").and_then(Value::as_str).unwrap_or("unknown");
            return match code {
                "nosuchrevid" | "missingtitle" => Ok(Fetched::Missing),
                "permissiondenied" | "readapidenied" => Ok(Fetched::Blocked),
                _ => Err(self.transport_error(format!("API error `{code}`"))),
            };
        }
        Ok(Fetched::Found(value))
    }

    fn first_page(&self, value: &Value) -> Result<Fetched<Value>> {
        let page = value.pointer("/query/pages/0").ok_or_else(|| self.transport_error("response lacks query.pages"))?;
        if page.get("missing").is_some() || page.get("invalid").is_some() {
            return Ok(Fetched::Missing);
        }
        Ok(Fetched::Found(page.clone()))
    }

    fn parse_revision(&self, rev: &Value) -> Result<RevisionMeta> {
        let rev_id =
            rev.get("revid").and_then(Value::as_u64).ok_or_else(|| self.transport_error("revision lacks revid"))?;
        let timestamp = rev
            .get("timestamp")
            .and_then(Value::as_str)
            .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
            .ok_or_else(|| self.transport_error(format!("revision {rev_id} has no valid timestamp")))?
            .with_timezone(&Utc);
        let user = rev.get("user").and_then(Value::as_str).unwrap_or_default().to_string();
        Ok(RevisionMeta {
            rev_id,
            parent_id: rev.get("parentid").and_then(Value::as_u64).unwrap_or(0),
            timestamp,
            is_bot: self.bots.is_bot(&user),
            user,
            comment: rev.get("comment").and_then(Value::as_str).unwrap_or_default().to_string(),
        })
    }

    fn content(rev: &Value) -> Option<String> {
        rev.pointer("/slots/main/content").and_then(Value::as_str).map(str::to_string)
    }

    /// Newest revision with its wikitext.
    pub fn fetch_last_revision(&self, title: &str) -> Result<Fetched<(RevisionMeta, String)>> {
        let params = [
            ("prop", "revisions".to_string()),
            ("titles", title.to_string()),
            ("rvprop", "ids|timestamp|user|comment|content".to_string()),
            ("rvslots", "main".to_string()),
            ("rvlimit", "1".to_string()),
        ];
        let value = match self.query(&params)? {
            Fetched::Found(v) => v,
            Fetched::Missing => return Ok(Fetched::Missing),
            Fetched::Blocked => return Ok(Fetched::Blocked),
        };
        let page = match self.first_page(&value)? {
            Fetched::Found(p) => p,
            other => return Ok(other.map_none()),
        };
        let Some(rev) = page.pointer("/revisions/0") else {
            return Ok(Fetched::Missing);
        };
        let meta = self.parse_revision(rev)?;
        match Self::content(rev) {
            Some(text) => Ok(Fetched::Found((meta, text))),
            // Suppressed content is as good as inaccessible.
            None => Ok(Fetched::Blocked),
        }
    }

    /// Wikitext of one revision.
    pub fn fetch_revision_text(&self, rev_id: u64) -> Result<Fetched<String>> {
        let params = [
            ("prop", "revisions".to_string()),
            ("revids", rev_id.to_string()),
            ("rvprop", "ids|content".to_string()),
            ("rvslots", "main".to_string()),
        ];
        let value = match self.query(&params)? {
            Fetched::Found(v) => v,
            other => return Ok(other.map_none()),
        };
        if value.pointer("/query/badrevids").is_some() {
            return Ok(Fetched::Missing);
        }
        let page = match self.first_page(&value)? {
            Fetched::Found(p) => p,
            other => return Ok(other.map_none()),
        };
        Ok(page.pointer("/revisions/0").and_then(Self::content).map_or(Fetched::Missing, Fetched::Found))
    }

    /// Revision metadata, newest first, following continuation until `until`
    /// is reached (inclusive) or the history ends.
    pub fn fetch_history(&self, title: &str, until: Option<u64>) -> Result<Vec<RevisionMeta>> {
        let mut out = Vec::new();
        let mut cont: Vec<(String, String)> = Vec::new();
        loop {
            let mut params: Vec<(&str, String)> = vec![
                ("prop", "revisions".to_string()),
                ("titles", title.to_string()),
                ("rvprop", "ids|timestamp|user|comment".to_string()),
                ("rvslots", "main".to_string()),
                ("rvlimit", HISTORY_PAGE_SIZE.to_string()),
            ];
            params.extend(cont.iter().map(|(k, v)| (k.as_str(), v.clone())));
            let value = match self.query(&params)? {
                Fetched::Found(v) => v,
                _ => return Ok(out),
            };
            let page = match self.first_page(&value)? {
                Fetched::Found(p) => p,
                _ => return Ok(out),
            };
            for rev in page.get("revisions").and_then(Value::as_array).into_iter().flatten() {
                let meta = self.parse_revision(rev)?;
                let done = until == Some(meta.rev_id);
                out.push(meta);
                if done {
                    return Ok(out);
                }
            }
            match value.get("continue") {
                None => return Ok(out),
                Some(Value::Object(map)) if map.contains_key("rvcontinue") => {
                    let next: Vec<(String, String)> = map
                        .iter()
                        .map(|(k, v)| (k.clone(), v.as_str().map_or_else(|| v.to_string(), str::to_string)))
                        .collect();
                    if next == cont {
                        return Err(self.transport_error(format!("pagination of `{title}` does not advance")));
                    }
                    cont = next;
                }
                Some(other) => {
                    return Err(self.transport_error(format!("malformed continuation token for `{title}`: {other}")))
                }
            }
        }
    }

    /// Views of `title` in `month`; 0 when the API has no data.
    pub fn fetch_monthly_views(&self, title: &str, month: YearMonth) -> Result<u64> {
        let api = self
            .endpoint
            .pageviews
            .as_ref()
            .ok_or_else(|| Error::Config(format!("endpoint `{}` has no pageviews API", self.endpoint.label)))?;
        let day = format!("{:04}{:02}01", month.year, month.month);
        let url = format!(
            "{}/per-article/{}/all-access/user/{}/monthly/{day}/{day}",
            api.base_url.trim_end_matches('/'),
            api.project,
            encode_path_segment(&title.replace(' ', "_")),
        );
        let response = self.send(HttpRequest::get(url, Vec::new()))?;
        match response.status {
            200 => {}
            404 => return Ok(0),
            s => return Err(self.transport_error(format!("pageviews: unexpected HTTP {s}"))),
        }
        let value: Value = serde_json::from_str(&response.body)
            .map_err(|e| self.transport_error(format!("pageviews: invalid JSON: {e}")))?;
        Ok(value
            .get("items")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(|item| item.get("views").and_then(Value::as_u64))
            .sum())
    }
}

impl<T> Fetched<T> {
    fn map_none<U>(self) -> Fetched<U> {
        match self {
            Fetched::Found(_) | Fetched::Missing => Fetched::Missing,
            Fetched::Blocked => Fetched::Blocked,
        }
    }
}

fn encode_path_segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-_.~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn decode_path_segment(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(b) = u8::from_str_radix(&s[i + 1..i + 3], 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// A revision as stored in a fixture wiki file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRevision {
    pub rev_id: u64,
    pub parent_id: u64,
    pub timestamp: DateTime<Utc>,
    pub user: String,
    #[serde(default)]
    pub comment: String,
    pub content: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixturePage {
    /// Newest first.
    pub revisions: Vec<FixtureRevision>,
    #[serde(default)]
    pub blocked: bool,
}

/// A wiki held in memory that answers the subset of the Action API and the
/// pageviews REST API used by [`MediaWikiClient`]. Endpoints with a
/// `fixture://<path>` base URL are served from such a file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureWiki {
    pub pages: BTreeMap<String, FixturePage>,
    #[serde(default)]
    pub views: BTreeMap<String, BTreeMap<YearMonth, u64>>,
    /// Revisions per history request; small values exercise pagination.
    #[serde(default = "default_fixture_page_size")]
    pub page_size: usize,
}

fn default_fixture_page_size() -> usize {
    HISTORY_PAGE_SIZE as usize
}

pub const FIXTURE_SCHEME: &str = "fixture://";

impl FixtureWiki {
    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    fn revision_json(rev: &FixtureRevision, with_content: bool) -> Value {
        let mut v = json!({
            "revid": rev.rev_id,
            "parentid": rev.parent_id,
            "timestamp": rev.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "user": rev.user,
            "comment": rev.comment,
        });
        if with_content {
            v["slots"] = json!({"main": {"contentmodel": "wikitext", "content": rev.content}});
        }
        v
    }

    fn answer_query(&self, q: &BTreeMap<&str, &str>) -> HttpResponse {
        let ok = |v: Value| HttpResponse { status: 200, body: v.to_string() };
        let with_content = q.get("rvprop").is_some_and(|p| p.split('|').any(|x| x == "content"));
        if let Some(revids) = q.get("revids") {
            let id: u64 = revids.parse().unwrap_or(0);
            for (title, page) in &self.pages {
                if let Some(rev) = page.revisions.iter().find(|r| r.rev_id == id) {
                    if page.blocked {
                        return HttpResponse { status: 403, body: String::new() };
                    }
                    return ok(
                        json!({"query": {"pages": [{"title": title, "revisions": [Self::revision_json(rev, with_content)]}]}}),
                    );
                }
            }
            return ok(json!({"query": {"badrevids": {id.to_string(): {"revid": id}}}}));
        }
        let title = q.get("titles").copied().unwrap_or_default();
        let Some(page) = self.pages.get(title) else {
            return ok(json!({"query": {"pages": [{"title": title, "missing": true}]}}));
        };
        if page.blocked {
            return HttpResponse { status: 403, body: String::new() };
        }
        let limit: usize = q.get("rvlimit").and_then(|l| l.parse().ok()).unwrap_or(1).min(self.page_size.max(1));
        let start = match q.get("rvcontinue") {
            Some(token) => {
                match token.parse::<u64>().ok().and_then(|id| page.revisions.iter().position(|r| r.rev_id == id)) {
                    Some(pos) => pos,
                    None => return ok(json!({"error": {"code": "badcontinue", "info": "invalid continue token"}})),
                }
            }
            None => 0,
        };
        let slice: Vec<Value> =
            page.revisions.iter().skip(start).take(limit).map(|r| Self::revision_json(r, with_content)).collect();
        let mut body = json!({"query": {"pages": [{"title": title, "revisions": slice}]}});
        if let Some(next) = page.revisions.get(start + limit) {
            body["continue"] = json!({"rvcontinue": next.rev_id.to_string(), "continue": "||"});
        }
        ok(body)
    }

    fn answer_pageviews(&self, url: &str) -> HttpResponse {
        let parts: Vec<&str> = url.split('/').collect();
        let n = parts.len();
        if n < 5 || parts[n - 3] != "monthly" {
            return HttpResponse { status: 400, body: String::new() };
        }
        let title = decode_path_segment(parts[n - 4]).replace('_', " ");
        let month = &parts[n - 2];
        let Ok(month) = format!("{}-{}", &month[..4], &month[4..6]).parse::<YearMonth>() else {
            return HttpResponse { status: 400, body: String::new() };
        };
        match self.views.get(&title).and_then(|m| m.get(&month)) {
            Some(&views) => HttpResponse { status: 200, body: json!({"items": [{"views": views}]}).to_string() },
            None => HttpResponse { status: 404, body: String::new() },
        }
    }
}

impl Transport for FixtureWiki {
    fn send(&self, request: &HttpRequest) -> std::result::Result<HttpResponse, String> {
        if request.url.contains("/per-article/") {
            return Ok(self.answer_pageviews(&request.url));
        }
        let q: BTreeMap<&str, &str> = request.query.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        if q.get("action") != Some(&"query") {
            return Ok(HttpResponse { status: 400, body: String::new() });
        }
        Ok(self.answer_query(&q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn rev(rev_id: u64, parent_id: u64, content: &str) -> FixtureRevision {
        FixtureRevision {
            rev_id,
            parent_id,
            timestamp: DateTime::from_timestamp(1_700_000_000 + rev_id as i64 * 60, 0).unwrap(),
            user: if rev_id == 2 { "CleanupBot".into() } else { format!("user{rev_id}") },
            comment: String::new(),
            content: content.into(),
        }
    }

    fn wiki() -> FixtureWiki {
        let mut pages = BTreeMap::new();
        pages.insert(
            "Kyiv".to_string(),
            FixturePage { revisions: vec![rev(3, 2, "three"), rev(2, 1, "two"), rev(1, 0, "one")], blocked: false },
        );
        pages.insert("Secret".to_string(), FixturePage { revisions: vec![rev(9, 0, "x")], blocked: true });
        let mut views = BTreeMap::new();
        views.insert("Kyiv".to_string(), BTreeMap::from([("2023-05".parse().unwrap(), 1234)]));
        FixtureWiki { pages, views, page_size: 2 }
    }

    fn client(w: FixtureWiki) -> MediaWikiClient {
        let mut endpoint = WikiEndpoint::new("fork", "fixture://test");
        endpoint.rate_limit = 1000.0;
        endpoint.pageviews =
            Some(PageviewsApi { base_url: "https://example.org/pageviews".into(), project: "x".into() });
        MediaWikiClient::new(endpoint, Arc::new(w), None).unwrap()
    }

    #[test]
    fn last_revision_and_missing_pages() {
        let c = client(wiki());
        let (meta, text) = c.fetch_last_revision("Kyiv").unwrap().found().unwrap();
        assert_eq!((meta.rev_id, meta.parent_id, text.as_str()), (3, 2, "three"));
        assert_eq!(c.fetch_last_revision("Nope").unwrap(), Fetched::Missing);
        assert_eq!(c.fetch_last_revision("Secret").unwrap(), Fetched::Blocked);
        assert_eq!(c.fetch_revision_text(1).unwrap(), Fetched::Found("one".into()));
        assert_eq!(c.fetch_revision_text(77).unwrap(), Fetched::Missing);
    }

    #[test]
    fn history_paginates_and_stops_at_until() {
        let c = client(wiki());
        let all = c.fetch_history("Kyiv", None).unwrap();
        assert_eq!(all.iter().map(|r| r.rev_id).collect::<Vec<_>>(), vec![3, 2, 1]);
        assert!(all.windows(2).all(|w| w[0].timestamp > w[1].timestamp));
        assert!(all[1].is_bot);
        assert_eq!(c.fetch_history("Kyiv", Some(1)).unwrap().len(), 3);
        let prefix = c.fetch_history("Kyiv", Some(2)).unwrap();
        assert_eq!(prefix.iter().map(|r| r.rev_id).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn monthly_views() {
        let c = client(wiki());
        assert_eq!(c.fetch_monthly_views("Kyiv", "2023-05".parse().unwrap()).unwrap(), 1234);
        assert_eq!(c.fetch_monthly_views("Kyiv", "2001-01".parse().unwrap()).unwrap(), 0);
    }

    struct BadContinue;
    impl Transport for BadContinue {
        fn send(&self, _: &HttpRequest) -> std::result::Result<HttpResponse, String> {
            let body = json!({"query": {"pages": [{"title": "A", "revisions": []}]}, "continue": "oops"});
            Ok(HttpResponse { status: 200, body: body.to_string() })
        }
    }

    #[test]
    fn malformed_continuation_is_a_transport_error() {
        let c = MediaWikiClient::new(WikiEndpoint::new("fork", "x"), Arc::new(BadContinue), None).unwrap();
        assert!(matches!(c.fetch_history("A", None), Err(Error::Transport { .. })));
    }

    struct Down;
    impl Transport for Down {
        fn send(&self, _: &HttpRequest) -> std::result::Result<HttpResponse, String> {
            Err("connection refused".into())
        }
    }

    #[test]
    fn network_down_fails_after_retries() {
        let c = MediaWikiClient::new(WikiEndpoint::new("fork", "x"), Arc::new(Down), None)
            .unwrap()
            .with_retry(RetryPolicy { max_retries: 2, base_delay: Duration::ZERO });
        match c.fetch_last_revision("A") {
            Err(Error::Transport { message, .. }) => assert!(message.contains("3 attempts")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_endpoints_are_rejected() {
        let mut e = WikiEndpoint::new("fork", "");
        assert!(e.validate().is_err());
        e.base_url = "https://x".into();
        e.rate_limit = 0.0;
        assert!(e.validate().is_err());
    }

    #[test]
    fn path_segments_roundtrip() {
        let t = "Медаль «За возвращение Крыма»/x?";
        assert_eq!(decode_path_segment(&encode_path_segment(t)), t);
    }
}
