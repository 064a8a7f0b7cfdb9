//! HTTP client for an external painter service.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::wire::{WireRequest, WireResponse};
use super::{PaintError, PaintRequest, PaintResult, Painter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Sent as a bearer token; kept out of project files.
    #[serde(skip)]
    pub api_key: Option<String>,
}

fn default_timeout() -> u64 {
    300
}

fn default_retries() -> u32 {
    2
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            api_key: None,
        }
    }

    pub fn endpoint(&self, path: &str) -> String {
        format!("{}{}", self.url.trim_end_matches('/'), path)
    }
}

pub(crate) fn http_client(timeout_secs: u64) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(timeout_secs))
        .build()
        .expect("http client builds")
}

pub struct RemotePainter {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemotePainter {
    pub fn new(config: RemoteConfig) -> Self {
        let client = http_client(config.timeout_secs);
        Self { config, client }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, body: &[u8]) -> Result<WireResponse, (bool, PaintError)> {
        let mut rb = self
            .client
            .post(self.config.endpoint("/v1/paint"))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.config.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(|e| {
            (true, PaintError::Transport { attempts: 0, message: e.to_string() })
        })?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, PaintError::Status { status: status.as_u16(), attempts: 0, body }));
        }
        let bytes = resp
            .bytes()
            .map_err(|e| (true, PaintError::Transport { attempts: 0, message: e.to_string() }))?;
        serde_json::from_slice(&bytes).map_err(|e| (false, PaintError::Protocol(e.to_string())))
    }
}

impl Painter for RemotePainter {
    fn identity(&self) -> String {
        format!("remote:{}", self.config.url)
    }

    fn paint(&self, req: &PaintRequest) -> Result<PaintResult, PaintError> {
        req.validate()?;
        let body = serde_json::to_vec(&WireRequest::from_request(req))
            .map_err(|e| PaintError::Protocol(e.to_string()))?;
        let start = Instant::now();
        let mut attempts = 0;
        let wire = loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(w) => break w,
                Err((retry, err)) if retry && attempts <= self.config.max_retries => {
                    log::warn!("paint attempt {attempts} failed: {err}; retrying");
                }
                Err((_, err)) => {
                    return Err(match err {
                        PaintError::Transport { message, .. } => PaintError::Transport { attempts, message },
                        PaintError::Status { status, body, .. } => PaintError::Status { status, attempts, body },
                        other => other,
                    })
                }
            }
        };
        let candidates = wire.to_images()?;
        let expected = req.depth.dims();
        if let Some((index, c)) = candidates.iter().enumerate().find(|(_, c)| c.dims() != expected) {
            return Err(PaintError::Resolution { index, expected, got: c.dims() });
        }
        Ok(PaintResult {
            candidates,
            backend: self.identity(),
            elapsed: start.elapsed(),
        })
    }
}
