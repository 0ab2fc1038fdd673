use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, CallTag, ChatRequest};

pub const API_KEY_ENV: &str = "RULEWEAVE_API_KEY";

fn default_concurrency() -> usize {
    4
}

fn default_rpm() -> u32 {
    60
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

fn default_backoff_ms() -> u64 {
    1000
}

/// Settings for a chat-completions-compatible endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Full URL of the completions route, e.g.
    /// `https://api.example.com/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    /// Requests per rolling minute.
    #[serde(default = "default_rpm")]
    pub rpm: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Retries on 429, 5xx and transport failures.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            max_concurrency: default_concurrency(),
            rpm: default_rpm(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

/// Counting semaphore.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking client for an OpenAI-style `chat/completions` endpoint.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    slots: Slots,
    window: Mutex<VecDeque<Instant>>,
}

impl HttpBackend {
    /// Reads the API key from `RULEWEAVE_API_KEY`. A missing key is only an
    /// error for endpoints that are not on localhost.
    pub fn from_env(config: HttpConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        let local = config.endpoint.starts_with("http://127.0.0.1") || config.endpoint.starts_with("http://localhost");
        if key.is_none() && !local {
            return Err(BackendError::MissingApiKey(API_KEY_ENV));
        }
        Ok(Self::with_key(config, key))
    }

    pub fn with_key(config: HttpConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let slots = Slots {
            free: Mutex::new(config.max_concurrency.max(1)),
            cv: Condvar::new(),
        };
        HttpBackend {
            config,
            api_key,
            agent,
            slots,
            window: Mutex::new(VecDeque::new()),
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// Blocks until a request fits in the per-minute budget, then records it.
    fn wait_for_budget(&self) {
        if self.config.rpm == 0 {
            return;
        }
        let minute = Duration::from_secs(60);
        loop {
            let mut window = self.window.lock().expect("rate window lock");
            let now = Instant::now();
            while window.front().is_some_and(|t| now.duration_since(*t) >= minute) {
                window.pop_front();
            }
            if window.len() < self.config.rpm as usize {
                window.push_back(now);
                return;
            }
            let wait = minute - now.duration_since(*window.front().expect("non-empty window"));
            drop(window);
            debug!("rate budget exhausted, sleeping {wait:?}");
            thread::sleep(wait);
        }
    }

    fn body(&self, request: &ChatRequest) -> Value {
        json!({
            "model": if request.model.is_empty() { &self.config.model } else { &request.model },
            "temperature": request.temperature,
            "messages": [
                { "role": "system", "content": request.system },
                { "role": "user", "content": request.user },
            ],
            "response_format": { "type": "json_object" },
            "stream": false,
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, (bool, BackendError)> {
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = req
            .send(body.to_string().as_bytes())
            .map_err(|e| (true, BackendError::Transport(e.to_string())))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| (true, BackendError::Transport(e.to_string())))?;
        if !(200..300).contains(&status) {
            let retryable = status == 429 || status >= 500;
            return Err((retryable, BackendError::Http { status, body: text }));
        }
        let parsed: Value = serde_json::from_str(&text)
            .map_err(|e| (false, BackendError::Protocol(format!("response is not JSON: {e}"))))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                (
                    false,
                    BackendError::Protocol("missing choices[0].message.content".into()),
                )
            })
    }
}

impl Backend for HttpBackend {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, tag: &CallTag, request: &ChatRequest) -> Result<String, BackendError> {
        let body = self.body(request);
        let _slot = self.slots.acquire();
        let mut tries = 0;
        loop {
            self.wait_for_budget();
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, err)) if tries < self.config.max_retries => {
                    tries += 1;
                    let delay = Duration::from_millis(self.config.backoff_ms.saturating_mul(1 << (tries - 1)));
                    warn!("{}/{}: {err}; retry {tries} in {delay:?}", tag.instance_id, tag.step);
                    thread::sleep(delay);
                }
                Err((_, err)) => return Err(err),
            }
        }
    }
}
