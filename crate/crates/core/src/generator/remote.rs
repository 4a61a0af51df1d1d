use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{DesignGenerator, GeneratorError, GeneratorResponse, PromptBundle, TokenUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_retries: u32,
    /// Seconds; attempt `n` waits `backoff_base * 2^n`.
    pub backoff_base: f64,
    /// Seconds per request.
    pub timeout: f64,
    pub max_in_flight: usize,
    pub verbose: bool,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            backoff_base: 2.0,
            timeout: 120.0,
            max_in_flight: 4,
            verbose: false,
        }
    }
}

/// Chat-completion client. No sampling parameters are sent.
pub struct RemoteGenerator {
    config: RemoteConfig,
    api_key: String,
    agent: ureq::Agent,
    in_flight: Mutex<usize>,
    slot_free: Condvar,
}

impl std::fmt::Debug for RemoteGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteGenerator")
            .field("config", &self.config)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

struct Permit<'a>(&'a RemoteGenerator);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("permit lock") -= 1;
        self.0.slot_free.notify_one();
    }
}

enum Attempt {
    Done(GeneratorResponse),
    Retry(GeneratorError),
    Fail(GeneratorError),
}

impl RemoteGenerator {
    /// Reads the key from `config.api_key_env`.
    pub fn new(config: RemoteConfig) -> Result<Self, GeneratorError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GeneratorError::MissingApiKey(config.api_key_env.clone()))?;
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: RemoteConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteGenerator {
            config,
            api_key,
            agent,
            in_flight: Mutex::new(0),
            slot_free: Condvar::new(),
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn acquire(&self) -> Permit<'_> {
        let limit = self.config.max_in_flight.max(1);
        let mut n = self.in_flight.lock().expect("permit lock");
        while *n >= limit {
            n = self.slot_free.wait(n).expect("permit lock");
        }
        *n += 1;
        Permit(self)
    }

    fn redact(&self, text: &str) -> String {
        text.replace(&self.api_key, "<redacted>")
    }

    fn request_body(&self, bundle: &PromptBundle) -> Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": bundle.system},
                {"role": "user", "content": bundle.user_message()},
            ],
        })
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let started = Instant::now();
        let sent = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut response = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(GeneratorError::Transport(self.redact(&e.to_string()))),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(GeneratorError::Transport(self.redact(&e.to_string()))),
        };
        if self.config.verbose {
            log::debug!("response {status}: {}", self.redact(&text));
        }
        if status == 429 || status >= 500 {
            return Attempt::Retry(GeneratorError::Remote {
                status,
                body: self.redact(&text),
            });
        }
        if status != 200 {
            return Attempt::Fail(GeneratorError::Remote {
                status,
                body: self.redact(&text),
            });
        }
        let parsed: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                return Attempt::Fail(GeneratorError::Remote {
                    status,
                    body: format!("unreadable completion ({e})"),
                })
            }
        };
        let content = parsed["choices"][0]["message"]["content"].as_str().unwrap_or_default();
        if content.is_empty() {
            return Attempt::Fail(GeneratorError::Remote {
                status,
                body: "completion has no message content".into(),
            });
        }
        let usage = parsed.get("usage").map(|u| TokenUsage {
            prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0),
        });
        Attempt::Done(GeneratorResponse {
            raw_text: content.to_string(),
            backend: format!("remote:{}", self.config.model),
            latency: started.elapsed().as_secs_f64(),
            usage,
            dead_end: false,
        })
    }
}

impl DesignGenerator for RemoteGenerator {
    fn backend(&self) -> &str {
        "remote"
    }

    /// `seed` is unused; the endpoint samples with its own defaults.
    fn generate(&self, bundle: &PromptBundle, _seed: u64) -> Result<GeneratorResponse, GeneratorError> {
        let _permit = self.acquire();
        let body = self.request_body(bundle);
        if self.config.verbose {
            log::debug!("request to {}: {}", self.config.endpoint, self.redact(&body.to_string()));
        }
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.config.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    let wait = self.config.backoff_base * 2f64.powi(attempt as i32);
                    log::warn!("generator attempt {} failed ({e}); retrying in {wait:.2}s", attempt + 1);
                    thread::sleep(Duration::from_secs_f64(wait.max(0.0)));
                    attempt += 1;
                }
            }
        }
    }
}
