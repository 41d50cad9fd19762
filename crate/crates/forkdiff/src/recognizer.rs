//! External named-entity recognizers.
//!
//! Both adapters speak the same JSON contract: the request is `{"text": ...}`
//! and the answer an array of `{surface, label, lemma, start, end}`.

use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Arc;

use forkdiff_core::analytics::{EntityRecognizer, NamedEntity, RecognizerError};
use serde_json::json;

use crate::transport::{send_with_retry, HttpRequest, RateLimiter, RetryPolicy, Transport};

fn parse_entities(body: &str) -> Result<Vec<NamedEntity>, RecognizerError> {
    serde_json::from_str(body).map_err(|e| RecognizerError(format!("invalid recognizer output: {e}")))
}

/// Runs `program args...` once per text, writing the request to stdin and
/// reading the answer from stdout.
#[derive(Debug, Clone)]
pub struct SubprocessRecognizer {
    pub program: String,
    pub args: Vec<String>,
}

impl SubprocessRecognizer {
    pub fn new(command: &[String]) -> Option<Self> {
        let (program, args) = command.split_first()?;
        Some(SubprocessRecognizer { program: program.clone(), args: args.to_vec() })
    }
}

impl EntityRecognizer for SubprocessRecognizer {
    fn recognize(&self, text: &str) -> Result<Vec<NamedEntity>, RecognizerError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| RecognizerError(format!("cannot start `{}`: {e}", self.program)))?;
        let request = json!({ "text": text }).to_string();
        if let Some(mut stdin) = child.stdin.take() {
            stdin.write_all(request.as_bytes()).map_err(|e| RecognizerError(e.to_string()))?;
        }
        let output = child.wait_with_output().map_err(|e| RecognizerError(e.to_string()))?;
        if !output.status.success() {
            return Err(RecognizerError(format!(
                "`{}` exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        parse_entities(&String::from_utf8_lossy(&output.stdout))
    }
}

/// POSTs each request to `url`.
pub struct HttpRecognizer {
    url: String,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl HttpRecognizer {
    pub fn new(url: &str, transport: Arc<dyn Transport>, requests_per_second: f64, retry: RetryPolicy) -> Self {
        HttpRecognizer { url: url.into(), transport, limiter: RateLimiter::new(requests_per_second), retry }
    }
}

impl EntityRecognizer for HttpRecognizer {
    fn recognize(&self, text: &str) -> Result<Vec<NamedEntity>, RecognizerError> {
        let request = HttpRequest::post_json(&self.url, json!({ "text": text }).to_string());
        let response =
            send_with_retry(self.transport.as_ref(), &self.limiter, &self.retry, &request).map_err(RecognizerError)?;
        if response.status != 200 {
            return Err(RecognizerError(format!("{}: HTTP {}", self.url, response.status)));
        }
        parse_entities(&response.body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::HttpResponse;
    use forkdiff_core::analytics::EntityLabel;

    struct Echo;

    impl Transport for Echo {
        fn send(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
            let text: serde_json::Value = serde_json::from_str(request.body.as_deref().unwrap()).unwrap();
            let t = text["text"].as_str().unwrap();
            let body = json!([{"surface": t, "label": "LOC", "lemma": t.to_lowercase(), "start": 0, "end": t.len()}]);
            Ok(HttpResponse { status: 200, body: body.to_string() })
        }
    }

    #[test]
    fn http_contract() {
        let r = HttpRecognizer::new("http://ner", Arc::new(Echo), 1e6, RetryPolicy::new(0));
        let e = r.recognize("Kyiv").unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].label, EntityLabel::Loc);
        assert_eq!(e[0].lemma, "kyiv");
    }

    #[cfg(unix)]
    #[test]
    fn subprocess_contract() {
        let cmd: Vec<String> =
            ["sh", "-c", r#"cat >/dev/null; echo '[{"surface":"Москва","label":"LOC","lemma":"москва"}]'"#]
                .iter()
                .map(|s| s.to_string())
                .collect();
        let r = SubprocessRecognizer::new(&cmd).unwrap();
        let e = r.recognize("в Москве").unwrap();
        assert_eq!(e[0].lemma, "москва");
        assert_eq!((e[0].start, e[0].end), (0, 0));

        let failing = SubprocessRecognizer::new(&["false".to_string()]).unwrap();
        assert!(failing.recognize("x").is_err());
    }
}
