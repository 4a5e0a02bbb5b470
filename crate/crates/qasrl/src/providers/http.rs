use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use qasrl_core::providers::ProviderError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Transport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderEndpoint {
    pub base_url: String,
    /// Name of the environment variable holding a bearer token.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout() -> u64 {
    30
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    200
}
fn default_in_flight() -> usize {
    8
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        ProviderEndpoint {
            base_url: base_url.into(),
            auth_token_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            max_in_flight: default_in_flight(),
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore");
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore") += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking JSON-over-HTTP transport with bounded concurrency and retries on
/// network errors, 429 and 5xx.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: ProviderEndpoint,
    token: Option<String>,
    permits: Semaphore,
}

enum Attempt {
    Done(Value),
    Retry(String),
    Fail(ProviderError),
}

impl HttpTransport {
    /// Fails when the configured token variable is unset.
    pub fn new(endpoint: ProviderEndpoint) -> Result<Self, ProviderError> {
        let token = match &endpoint.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::transport(&endpoint.base_url, format!("auth token variable {var} is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Semaphore { free: Mutex::new(endpoint.max_in_flight.max(1)), cv: Condvar::new() };
        Ok(HttpTransport { agent, endpoint, token, permits })
    }

    fn url(&self, route: &str) -> String {
        format!("{}{}", self.endpoint.base_url.trim_end_matches('/'), route)
    }

    fn attempt(&self, route: &str, body: &Value, label: &str) -> Attempt {
        let mut req = self.agent.post(self.url(route));
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fail(ProviderError::content(route, format!("{label}: HTTP {status} {}", text.trim())));
        }
        match resp.body_mut().read_json::<Value>() {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Fail(ProviderError::content(route, format!("{label}: {e}"))),
        }
    }
}

impl Transport for HttpTransport {
    fn call(&self, route: &str, body: &Value, label: &str) -> Result<Value, ProviderError> {
        let _permit = self.permits.acquire();
        let mut last = String::new();
        for n in 0..=self.endpoint.max_retries {
            if n > 0 {
                let wait = self.endpoint.backoff_ms.saturating_mul(1u64 << (n - 1).min(16));
                log::debug!("retrying {route} for {label} in {wait} ms after {last}");
                thread::sleep(Duration::from_millis(wait));
            }
            match self.attempt(route, body, label) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(msg) => last = msg,
            }
        }
        Err(ProviderError::transport(
            route,
            format!("{label}: {last} after {} attempts", self.endpoint.max_retries + 1),
        ))
    }
}
