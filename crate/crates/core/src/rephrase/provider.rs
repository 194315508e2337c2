//! Language-model provider abstraction.
//!
//! Wire contract for remote providers: the request body is a JSON object
//! `{ "strategy", "original", "context": [{ "speaker", "text" }], "max_tokens",
//! "prompt" }` and a successful response is `{ "text" }`.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::prompt::ContextLine;
use super::strategy::Strategy;
use crate::clock::{Clock, Millis};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub strategy: Strategy,
    pub original: String,
    pub context: Vec<ContextLine>,
    pub max_tokens: u32,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider call timed out")]
    Timeout,
    #[error("provider refused or returned empty output")]
    Refusal,
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {0}")]
    Status(u16),
}

/// Per-call budget and the clock the call should account time against.
pub struct CallContext<'a> {
    pub timeout_ms: Millis,
    pub clock: &'a dyn Clock,
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(
        &self,
        request: &ProviderRequest,
        call: &CallContext<'_>,
    ) -> Result<ProviderResponse, ProviderError>;
}

/// Deterministic offline provider: prefixes a strategy-specific clause to the
/// original text.
#[derive(Debug, Clone)]
pub struct MockProvider {
    clauses: BTreeMap<Strategy, String>,
    latency_ms: Millis,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::with_clauses([
            (Strategy::Restate, "I hear you, and you make a good point."),
            (
                Strategy::Validate,
                "I can see you care a lot about this issue, and I appreciate that.",
            ),
            (Strategy::Polite, "Maybe I'm missing something, but I would gently say that"),
        ])
    }

    pub fn with_clauses<S: Into<String>>(clauses: impl IntoIterator<Item = (Strategy, S)>) -> Self {
        Self {
            clauses: clauses.into_iter().map(|(k, v)| (k, v.into())).collect(),
            latency_ms: 0,
        }
    }

    /// Simulated response time charged to the call's clock.
    pub fn with_latency(mut self, latency_ms: Millis) -> Self {
        self.latency_ms = latency_ms;
        self
    }

    pub fn clause(&self, strategy: Strategy) -> &str {
        self.clauses.get(&strategy).map(String::as_str).unwrap_or("")
    }
}

impl Default for MockProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(
        &self,
        request: &ProviderRequest,
        call: &CallContext<'_>,
    ) -> Result<ProviderResponse, ProviderError> {
        if self.latency_ms >= call.timeout_ms {
            call.clock.sleep_ms(call.timeout_ms);
            return Err(ProviderError::Timeout);
        }
        call.clock.sleep_ms(self.latency_ms);
        let clause = self.clause(request.strategy);
        let text = if clause.is_empty() {
            request.original.clone()
        } else {
            format!("{clause} {}", request.original)
        };
        Ok(ProviderResponse { text })
    }
}

/// Never answers: every call burns its full timeout.
#[derive(Debug, Clone, Default)]
pub struct TimeoutProvider;

impl Provider for TimeoutProvider {
    fn name(&self) -> &str {
        "timeout"
    }

    fn complete(
        &self,
        _request: &ProviderRequest,
        call: &CallContext<'_>,
    ) -> Result<ProviderResponse, ProviderError> {
        call.clock.sleep_ms(call.timeout_ms);
        Err(ProviderError::Timeout)
    }
}

/// Answers immediately with an empty completion.
#[derive(Debug, Clone, Default)]
pub struct RefusingProvider;

impl Provider for RefusingProvider {
    fn name(&self) -> &str {
        "refusing"
    }

    fn complete(
        &self,
        _request: &ProviderRequest,
        _call: &CallContext<'_>,
    ) -> Result<ProviderResponse, ProviderError> {
        Err(ProviderError::Refusal)
    }
}

/// HTTP client for a completion endpoint speaking the JSON wire contract.
pub struct RemoteProvider {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key,
            agent,
        }
    }

    /// Reads the credential from `key_var`; a missing variable leaves the
    /// request unauthenticated.
    pub fn from_env(endpoint: impl Into<String>, key_var: &str) -> Self {
        Self::new(endpoint, std::env::var(key_var).ok())
    }
}

impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(
        &self,
        request: &ProviderRequest,
        call: &CallContext<'_>,
    ) -> Result<ProviderResponse, ProviderError> {
        let mut builder = self
            .agent
            .post(&self.endpoint)
            .config()
            .timeout_global(Some(Duration::from_millis(call.timeout_ms)))
            .build();
        if let Some(key) = &self.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = builder.send_json(request).map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            other => ProviderError::Transport(other.to_string()),
        })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(ProviderError::Status(status));
        }
        let body: ProviderResponse = response.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            other => ProviderError::Transport(other.to_string()),
        })?;
        if body.text.trim().is_empty() {
            return Err(ProviderError::Refusal);
        }
        Ok(body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn request(strategy: Strategy) -> ProviderRequest {
        ProviderRequest {
            strategy,
            original: "guns are fine".into(),
            context: vec![],
            max_tokens: 120,
            prompt: "p".into(),
        }
    }

    #[test]
    fn mock_prefixes_clause() {
        let clock = ManualClock::default();
        let call = CallContext {
            timeout_ms: 10_000,
            clock: &clock,
        };
        let p = MockProvider::with_clauses([(Strategy::Restate, "R:")]).with_latency(300);
        let out = p.complete(&request(Strategy::Restate), &call).unwrap();
        assert_eq!(out.text, "R: guns are fine");
        assert_eq!(clock.now_ms(), 300);
        // no clause configured: echo
        let out = p.complete(&request(Strategy::Polite), &call).unwrap();
        assert_eq!(out.text, "guns are fine");
    }

    #[test]
    fn slow_mock_and_timeout_provider_burn_the_budget() {
        let clock = ManualClock::default();
        let call = CallContext {
            timeout_ms: 10_000,
            clock: &clock,
        };
        let slow = MockProvider::new().with_latency(20_000);
        assert_eq!(
            slow.complete(&request(Strategy::Polite), &call),
            Err(ProviderError::Timeout)
        );
        assert_eq!(clock.now_ms(), 10_000);
        assert_eq!(
            TimeoutProvider.complete(&request(Strategy::Polite), &call),
            Err(ProviderError::Timeout)
        );
        assert_eq!(clock.now_ms(), 20_000);
    }

    /// One-shot HTTP server returning `body` with `status`; yields the raw
    /// request it received.
    fn serve_once(status: u16, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/complete", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut payload = vec![0; content_length];
            reader.read_exact(&mut payload).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            head + &String::from_utf8(payload).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn remote_provider_speaks_the_json_contract() {
        let (url, handle) = serve_once(200, r#"{"text":"I hear you."}"#);
        let provider = RemoteProvider::new(url, Some("sekrit".into()));
        let clock = ManualClock::default();
        let call = CallContext {
            timeout_ms: 5_000,
            clock: &clock,
        };
        let out = provider.complete(&request(Strategy::Restate), &call).unwrap();
        assert_eq!(out.text, "I hear you.");
        let raw = handle.join().unwrap();
        assert!(raw.contains("Bearer sekrit"));
        let body = &raw[raw.find('{').unwrap()..];
        let sent: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(sent["strategy"], "Restate");
        assert_eq!(sent["original"], "guns are fine");
        assert_eq!(sent["max_tokens"], 120);
        assert!(sent["context"].is_array());
    }

    #[test]
    fn remote_provider_maps_failures() {
        let clock = ManualClock::default();
        let call = CallContext {
            timeout_ms: 5_000,
            clock: &clock,
        };
        let (url, handle) = serve_once(200, r#"{"text":"  "}"#);
        let out = RemoteProvider::new(url, None).complete(&request(Strategy::Polite), &call);
        assert_eq!(out, Err(ProviderError::Refusal));
        handle.join().unwrap();

        let (url, handle) = serve_once(503, r#"{}"#);
        let out = RemoteProvider::new(url, None).complete(&request(Strategy::Polite), &call);
        assert_eq!(out, Err(ProviderError::Status(503)));
        handle.join().unwrap();
    }
}
