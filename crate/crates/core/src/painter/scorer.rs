//! Text-image scorers used as the learned term of candidate selection.

use serde::{Deserialize, Serialize};

use super::remote::{http_client, RemoteConfig};
use super::wire::encode_png;
use crate::raster::{rgb_to_png, RgbImage};

pub trait Scorer: Send + Sync {
    fn score(&self, img: &RgbImage, prompt: &str) -> f64;
}

/// Scores everything 0, leaving selection to SSIM/PSNR.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullScorer;

impl Scorer for NullScorer {
    fn score(&self, _img: &RgbImage, _prompt: &str) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub score: f64,
}

/// `POST /v1/score`; any failure degrades to the null score with a warning.
pub struct RemoteScorer {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Self {
        let client = http_client(config.timeout_secs);
        Self { config, client }
    }

    fn try_score(&self, img: &RgbImage, prompt: &str) -> Result<f64, String> {
        let body = ScoreRequest {
            prompt: prompt.to_string(),
            image: encode_png(&rgb_to_png(img)),
        };
        let mut rb = self.client.post(self.config.endpoint("/v1/score")).json(&body);
        if let Some(key) = &self.config.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        let parsed: ScoreResponse = resp.json().map_err(|e| e.to_string())?;
        if !parsed.score.is_finite() {
            return Err("non-finite score".into());
        }
        Ok(parsed.score)
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, img: &RgbImage, prompt: &str) -> f64 {
        self.try_score(img, prompt).unwrap_or_else(|e| {
            log::warn!("scorer at {} failed ({e}); using 0.0", self.config.url);
            NullScorer.score(img, prompt)
        })
    }
}
