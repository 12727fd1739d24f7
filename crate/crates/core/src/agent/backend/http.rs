//! Chat-completions client for OpenAI-compatible endpoints.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatBackendParams};
use crate::agent::prompt::DailyPrompt;

pub const API_KEY_ENV: &str = "AGENTLAB_API_KEY";
pub const BASE_URL_ENV: &str = "AGENTLAB_BASE_URL";

/// Exponential backoff schedule between transient failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub initial_ms: u64,
    pub max_ms: u64,
    pub multiplier: f64,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff { initial_ms: 500, max_ms: 30_000, multiplier: 2.0 }
    }
}

impl Backoff {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.initial_ms as f64 * self.multiplier.powi(attempt as i32);
        Duration::from_millis(ms.min(self.max_ms as f64) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub max_in_flight: usize,
    pub backoff: Backoff,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig { base_url: "https://api.openai.com/v1".into(), max_in_flight: 4, backoff: Backoff::default() }
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    messages: [Message<'a>; 2],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Counting semaphore bounding concurrent requests.
struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Permits { available: Mutex::new(n.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("permit lock poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("permit lock poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("permit lock poisoned") += 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: String,
    permits: Permits,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig, api_key: impl Into<String>) -> Self {
        let permits = Permits::new(config.max_in_flight);
        HttpBackend { config, api_key: api_key.into(), permits }
    }

    /// Reads the API key (required) and base URL override from the environment.
    pub fn from_env(mut config: HttpBackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::MissingApiKey(API_KEY_ENV.into()))?;
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.trim().is_empty() {
                config.base_url = url;
            }
        }
        Ok(HttpBackend::new(config, key))
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn send_once(&self, agent: &ureq::Agent, body: &ChatRequest<'_>) -> Result<String, BackendError> {
        let _permit = self.permits.acquire();
        let text = post_json(agent, &self.endpoint(), &self.api_key, body)?;
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::InvalidResponse("no message content in choices".into()))
    }
}

pub(crate) fn agent_with_timeout(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

/// One authenticated JSON POST; returns the body of a 2xx response.
pub(crate) fn post_json<B: Serialize>(agent: &ureq::Agent, url: &str, api_key: &str, body: &B) -> Result<String, BackendError> {
    let response = agent
        .post(url)
        .header("Authorization", format!("Bearer {api_key}"))
        .send_json(body)
        .map_err(classify)?;
    let status = response.status().as_u16();
    let text = response.into_body().read_to_string().map_err(classify)?;
    match status {
        200..=299 => Ok(text),
        429 => Err(BackendError::RateLimited),
        _ => Err(BackendError::Status { status, body: truncate(&text, 500) }),
    }
}

/// Calls `f` until it succeeds, fails permanently, or `max_retries` transient
/// failures have been retried.
pub(crate) fn with_retry<T>(backoff: &Backoff, max_retries: u32, mut f: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
    let mut attempt = 0;
    loop {
        match f() {
            Err(e) if e.is_transient() && attempt < max_retries => {
                thread::sleep(backoff.delay(attempt));
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn classify(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::StatusCode(429) => BackendError::RateLimited,
        ureq::Error::StatusCode(status) => BackendError::Status { status, body: String::new() },
        other => BackendError::Transport(other.to_string()),
    }
}

impl ChatBackend for HttpBackend {
    /// One chat completion, retried with backoff on transient failures up to
    /// `params.max_retries` times.
    fn complete(&self, prompt: &DailyPrompt, params: &ChatBackendParams) -> Result<String, BackendError> {
        params.validate()?;
        let agent = agent_with_timeout(params.timeout);
        let body = ChatRequest {
            model: &params.model_name,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            messages: [
                Message { role: "system", content: &prompt.system_text },
                Message { role: "user", content: &prompt.user_text },
            ],
        };
        with_retry(&self.config.backoff, params.max_retries, || self.send_once(&agent, &body))
    }

    fn model_name(&self, params: &ChatBackendParams) -> String {
        params.model_name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_grows_and_caps() {
        let b = Backoff { initial_ms: 100, max_ms: 1000, multiplier: 2.0 };
        assert_eq!(b.delay(0), Duration::from_millis(100));
        assert_eq!(b.delay(2), Duration::from_millis(400));
        assert_eq!(b.delay(10), Duration::from_millis(1000));
    }

    #[test]
    fn endpoint_joins_base_url() {
        let b = HttpBackend::new(HttpBackendConfig { base_url: "http://localhost:9/v1/".into(), ..Default::default() }, "k");
        assert_eq!(b.endpoint(), "http://localhost:9/v1/chat/completions");
    }

    fn serve_once(status: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        use std::io::{BufRead, BufReader, Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut payload = vec![0; len];
            reader.read_exact(&mut payload).unwrap();
            let reply = format!("HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}", body.len());
            stream.write_all(reply.as_bytes()).unwrap();
            head + &String::from_utf8(payload).unwrap()
        });
        (url, handle)
    }

    fn prompt() -> DailyPrompt {
        use crate::agent::{build_prompt, AgentMemory, Persona, PersonaId};
        use crate::env::{BatteryConfig, EnvState, InterventionSchedule, PriceModel};
        let cfg = BatteryConfig::default();
        let sched = InterventionSchedule::none();
        build_prompt(&Persona::builtin(PersonaId::Thinker), &EnvState::initial(&cfg, &sched), crate::Cents(500), &AgentMemory::default(), &sched, &cfg, &PriceModel::default())
    }

    #[test]
    fn request_and_response_follow_chat_completions_format() {
        let (url, server) = serve_once("200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#);
        let backend = HttpBackend::new(HttpBackendConfig { base_url: url, ..Default::default() }, "secret");
        let params = ChatBackendParams { model_name: "test-model".into(), ..Default::default() };
        assert_eq!(backend.complete(&prompt(), &params).unwrap(), "hello");
        let request = server.join().unwrap();
        assert!(request.starts_with("POST /v1/chat/completions"));
        assert!(request.to_ascii_lowercase().contains("authorization: bearer secret"));
        let body: serde_json::Value = serde_json::from_str(&request[request.find("\r\n\r\n").unwrap() + 4..]).unwrap();
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["role"], "user");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, server) = serve_once("401 Unauthorized", r#"{"error":"bad key"}"#);
        let backend = HttpBackend::new(HttpBackendConfig { base_url: url, ..Default::default() }, "k");
        let err = backend.complete(&prompt(), &ChatBackendParams::default()).unwrap_err();
        assert!(matches!(err, BackendError::Status { status: 401, .. }));
        assert!(!err.is_transient());
        server.join().unwrap();
    }

    #[test]
    fn unreachable_host_is_a_transport_error_after_retries() {
        let backend = HttpBackend::new(
            HttpBackendConfig { base_url: "http://127.0.0.1:1".into(), max_in_flight: 1, backoff: Backoff { initial_ms: 1, max_ms: 2, multiplier: 2.0 } },
            "k",
        );
        let params = ChatBackendParams { max_retries: 2, timeout: Duration::from_secs(5), ..Default::default() };
        assert!(backend.complete(&prompt(), &params).unwrap_err().is_transient());
    }
}
