//! Pluggable language-model backends.
//!
//! Two implementations ship: [`HttpBackend`] for OpenAI-compatible
//! chat/completions servers and [`ScriptedBackend`], which replays a JSON
//! fixture and records every request it sees.

use std::fs;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend returned {got} samples, expected {expected}")]
    WrongCount { expected: usize, got: usize },
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

/// Which stage of the two-call protocol issued a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestPurpose {
    Plan,
    Execute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub sample_count: usize,
    pub temperature: f64,
    pub max_output_length: usize,
    pub purpose: RequestPurpose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSample {
    pub text: String,
    #[serde(default)]
    pub token_logprobs: Option<Vec<f64>>,
}

impl LlmSample {
    pub fn new(text: impl Into<String>, token_logprobs: Option<Vec<f64>>) -> Self {
        Self {
            text: text.into(),
            token_logprobs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub samples: Vec<LlmSample>,
}

pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;

    /// Like [`complete`](Self::complete) but enforces the sample count.
    fn complete_exact(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let resp = self.complete(request)?;
        if resp.samples.len() != request.sample_count {
            return Err(LlmError::WrongCount {
                expected: request.sample_count,
                got: resp.samples.len(),
            });
        }
        Ok(resp)
    }
}

impl<T: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

/// Fixture file contents: either one list used for every request, or
/// separate lists for plan and execution requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fixture {
    Single(Vec<LlmSample>),
    Staged {
        plan: Vec<LlmSample>,
        execute: Vec<LlmSample>,
    },
}

#[derive(Debug, Default)]
struct Cursor {
    plan: usize,
    execute: usize,
    calls: Vec<LlmRequest>,
}

/// Replays fixture samples in order, wrapping around at the end. Each request
/// takes `sample_count` consecutive entries from its stage's list.
#[derive(Debug)]
pub struct ScriptedBackend {
    fixture: Fixture,
    state: Mutex<Cursor>,
}

impl ScriptedBackend {
    pub fn new(fixture: Fixture) -> Self {
        Self {
            fixture,
            state: Mutex::new(Cursor::default()),
        }
    }

    pub fn from_samples(samples: Vec<LlmSample>) -> Self {
        Self::new(Fixture::Single(samples))
    }

    pub fn staged(plan: Vec<LlmSample>, execute: Vec<LlmSample>) -> Self {
        Self::new(Fixture::Staged { plan, execute })
    }

    pub fn from_json(s: &str) -> Result<Self, LlmError> {
        serde_json::from_str(s)
            .map(Self::new)
            .map_err(|e| LlmError::Protocol(format!("bad fixture: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let s = fs::read_to_string(path)
            .map_err(|e| LlmError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    /// Every request received so far, in order.
    pub fn calls(&self) -> Vec<LlmRequest> {
        self.state
            .lock()
            .expect("scripted backend poisoned")
            .calls
            .clone()
    }

    /// Rewinds both cursors and forgets recorded calls.
    pub fn reset(&self) {
        *self.state.lock().expect("scripted backend poisoned") = Cursor::default();
    }
}

impl LlmBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut state = self.state.lock().expect("scripted backend poisoned");
        state.calls.push(request.clone());
        let (list, cursor) = match (&self.fixture, request.purpose) {
            (Fixture::Single(list), _) => (list, &mut state.plan),
            (Fixture::Staged { plan, .. }, RequestPurpose::Plan) => (plan, &mut state.plan),
            (Fixture::Staged { execute, .. }, RequestPurpose::Execute) => {
                (execute, &mut state.execute)
            }
        };
        if list.is_empty() {
            return Err(LlmError::Unavailable("fixture has no responses".into()));
        }
        let samples = (0..request.sample_count)
            .map(|i| list[(*cursor + i) % list.len()].clone())
            .collect();
        *cursor = (*cursor + request.sample_count) % list.len();
        Ok(LlmResponse { samples })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Full URL of the chat/completions endpoint.
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    30
}

/// Client for OpenAI-compatible chat/completions endpoints. All samples of a
/// request are fetched in one call using the `n` parameter.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: OnceLock<reqwest::blocking::Client>,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        Self {
            config,
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, LlmError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }

    /// Request body sent for `request`.
    pub fn request_body(&self, request: &LlmRequest) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "n": request.sample_count,
            "temperature": request.temperature,
            "max_tokens": request.max_output_length,
            "logprobs": true,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    #[serde(default)]
    index: usize,
    message: ChatMessage,
    #[serde(default)]
    logprobs: Option<ChatLogprobs>,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatLogprobs {
    #[serde(default)]
    content: Option<Vec<TokenLogprob>>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    logprob: f64,
}

/// Parses a chat/completions response body into samples ordered by choice
/// index.
pub fn parse_chat_response(body: &str) -> Result<LlmResponse, LlmError> {
    let mut parsed: ChatResponse =
        serde_json::from_str(body).map_err(|e| LlmError::Protocol(e.to_string()))?;
    parsed.choices.sort_by_key(|c| c.index);
    Ok(LlmResponse {
        samples: parsed
            .choices
            .into_iter()
            .map(|c| LlmSample {
                text: c.message.content.unwrap_or_default(),
                token_logprobs: c
                    .logprobs
                    .and_then(|l| l.content)
                    .map(|toks| toks.into_iter().map(|t| t.logprob).collect()),
            })
            .collect(),
    })
}

impl LlmBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut req = self
            .client()?
            .post(&self.config.endpoint)
            .json(&self.request_body(request));
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(LlmError::Unavailable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(LlmError::Protocol(format!("HTTP {status}: {body}")));
        }
        parse_chat_response(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(n: usize, purpose: RequestPurpose) -> LlmRequest {
        LlmRequest {
            prompt: "p".into(),
            sample_count: n,
            temperature: 0.7,
            max_output_length: 64,
            purpose,
        }
    }

    #[test]
    fn scripted_backend_wraps_and_records() {
        let b = ScriptedBackend::from_samples(vec![
            LlmSample::new("a", None),
            LlmSample::new("b", None),
            LlmSample::new("c", None),
        ]);
        let r1 = b.complete(&req(2, RequestPurpose::Execute)).unwrap();
        let r2 = b.complete(&req(2, RequestPurpose::Execute)).unwrap();
        let texts: Vec<_> = r1
            .samples
            .iter()
            .chain(&r2.samples)
            .map(|s| s.text.as_str())
            .collect();
        assert_eq!(texts, ["a", "b", "c", "a"]);
        assert_eq!(b.calls().len(), 2);
        b.reset();
        assert!(b.calls().is_empty());
    }

    #[test]
    fn staged_fixture_keeps_separate_cursors() {
        let b = ScriptedBackend::staged(
            vec![LlmSample::new("PLAN: none", None)],
            vec![LlmSample::new("x", None), LlmSample::new("y", None)],
        );
        b.complete(&req(1, RequestPurpose::Plan)).unwrap();
        let r = b.complete(&req(1, RequestPurpose::Execute)).unwrap();
        assert_eq!(r.samples[0].text, "x");
    }

    #[test]
    fn fixture_formats_parse() {
        assert!(ScriptedBackend::from_json(r#"[{"text":"a","token_logprobs":[-0.1]}]"#).is_ok());
        assert!(ScriptedBackend::from_json(r#"{"plan":[],"execute":[{"text":"a"}]}"#).is_ok());
        assert!(ScriptedBackend::from_json(r#"{"nope":1}"#).is_err());
        assert!(ScriptedBackend::from_json(crate::corpus::COFFEE_MOCK_FIXTURE).is_ok());
    }

    #[test]
    fn complete_exact_checks_count() {
        struct Short;
        impl LlmBackend for Short {
            fn name(&self) -> &str {
                "short"
            }
            fn complete(&self, _: &LlmRequest) -> Result<LlmResponse, LlmError> {
                Ok(LlmResponse { samples: vec![] })
            }
        }
        assert_eq!(
            Short.complete_exact(&req(5, RequestPurpose::Execute)),
            Err(LlmError::WrongCount {
                expected: 5,
                got: 0
            })
        );
    }

    #[test]
    fn chat_response_parsing() {
        let body = r#"{"choices":[
            {"index":1,"message":{"content":"second"}},
            {"index":0,"message":{"content":"first"},"logprobs":{"content":[{"token":"a","logprob":-0.5}]}}
        ]}"#;
        let r = parse_chat_response(body).unwrap();
        assert_eq!(r.samples[0].text, "first");
        assert_eq!(r.samples[0].token_logprobs, Some(vec![-0.5]));
        assert_eq!(r.samples[1].token_logprobs, None);
        assert!(parse_chat_response("{}").is_err());
    }
}
