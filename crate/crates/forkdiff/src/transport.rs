//! HTTP transport, rate limiting and retries.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub query: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>, query: Vec<(String, String)>) -> Self {
        HttpRequest { method: Method::Get, url: url.into(), query, headers: Vec::new(), body: None }
    }

    pub fn post_json(url: impl Into<String>, body: String) -> Self {
        HttpRequest {
            method: Method::Post,
            url: url.into(),
            query: Vec::new(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(body),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Anything that can answer an HTTP request. `Err` means no response at all.
pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("forkdiff/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        if !request.query.is_empty() {
            builder = builder.query(&request.query);
        }
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder.send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Token bucket of capacity one: consecutive permits are at least
/// `1 / rate` seconds apart.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(per_second: f64) -> Self {
        assert!(per_second > 0.0, "rate limit must be positive");
        RateLimiter { interval: Duration::from_secs_f64(1.0 / per_second), next: Mutex::new(None) }
    }

    pub fn acquire(&self) {
        let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let start = match *next {
            Some(t) if t > now => {
                thread::sleep(t - now);
                t
            }
            _ => now,
        };
        *next = Some(start + self.interval);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl RetryPolicy {
    pub fn new(max_retries: u32) -> Self {
        RetryPolicy { max_retries, base_delay: Duration::from_secs(1) }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32.checked_shl(retry).unwrap_or(u32::MAX))
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || status >= 500
}

/// Send with rate limiting and exponential backoff. Responses other than 429
/// and 5xx are returned as they are.
pub fn send_with_retry(
    transport: &dyn Transport,
    limiter: &RateLimiter,
    policy: &RetryPolicy,
    request: &HttpRequest,
) -> Result<HttpResponse, String> {
    let mut last = String::new();
    for attempt in 0..=policy.max_retries {
        if attempt > 0 {
            thread::sleep(policy.delay(attempt - 1));
        }
        limiter.acquire();
        match transport.send(request) {
            Ok(r) if retryable(r.status) => last = format!("HTTP {}", r.status),
            Ok(r) => return Ok(r),
            Err(e) => last = e,
        }
    }
    Err(format!("giving up after {} attempts: {last}", policy.max_retries + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    impl Transport for Flaky {
        fn send(&self, _: &HttpRequest) -> Result<HttpResponse, String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Ok(HttpResponse { status: 503, body: String::new() })
            } else {
                Ok(HttpResponse { status: 200, body: "ok".into() })
            }
        }
    }

    fn fast(max_retries: u32) -> RetryPolicy {
        RetryPolicy { max_retries, base_delay: Duration::ZERO }
    }

    #[test]
    fn retries_until_success() {
        let t = Flaky { failures: 2, calls: AtomicU32::new(0) };
        let r = send_with_retry(&t, &RateLimiter::new(1e6), &fast(5), &HttpRequest::get("x", vec![])).unwrap();
        assert_eq!(r.body, "ok");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let t = Flaky { failures: 100, calls: AtomicU32::new(0) };
        let err = send_with_retry(&t, &RateLimiter::new(1e6), &fast(2), &HttpRequest::get("x", vec![])).unwrap_err();
        assert!(err.contains("3 attempts"), "{err}");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::new(5);
        assert_eq!(p.delay(0), Duration::from_secs(1));
        assert_eq!(p.delay(3), Duration::from_secs(8));
    }
}
