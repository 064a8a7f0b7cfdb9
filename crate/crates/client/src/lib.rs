//! Async client for the scenepaint HTTP API.

use std::path::Path;
use std::time::Duration;

use reqwest::{Response, StatusCode};
use serde::de::DeserializeOwned;
use tokio::io::AsyncWriteExt;

use scenepaint_core::pipeline::EditCommand;
use scenepaint_core::projection::PerspCamera;
use scenepaint_service::api::{
    format_camera, EditResponse, ErrorBody, JobAccepted, JobStatus, SceneDescriptor, ServiceEvent, TextureRequest,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with an error status.
    #[error("{status}: {} ({})", body.reason, body.error)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

async fn checked(resp: Response) -> Result<Response, ClientError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let text = resp.text().await?;
    let body = serde_json::from_str(&text).unwrap_or_else(|_| ErrorBody {
        error: "http".into(),
        reason: text,
    });
    Err(ClientError::Api { status, body })
}

async fn json<T: DeserializeOwned>(resp: Response) -> Result<T, ClientError> {
    let bytes = checked(resp).await?.bytes().await?;
    serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn scene(&self) -> Result<SceneDescriptor, ClientError> {
        json(self.http.get(self.url("/v1/scene")).send().await?).await
    }

    pub async fn texture(&self, request: &TextureRequest) -> Result<JobAccepted, ClientError> {
        json(self.http.post(self.url("/v1/texture")).json(request).send().await?).await
    }

    pub async fn job(&self, id: u64) -> Result<JobStatus, ClientError> {
        json(self.http.get(self.url(&format!("/v1/jobs/{id}"))).send().await?).await
    }

    /// Polls a job until it finishes, reporting each status that changed.
    pub async fn wait(
        &self,
        id: u64,
        every: Duration,
        mut on_update: impl FnMut(&JobStatus),
    ) -> Result<JobStatus, ClientError> {
        let mut last: Option<JobStatus> = None;
        loop {
            let status = self.job(id).await?;
            if last.as_ref().is_none_or(|l| l.updated_ms != status.updated_ms || l.phase != status.phase) {
                on_update(&status);
            }
            if status.phase.is_finished() {
                return Ok(status);
            }
            last = Some(status);
            tokio::time::sleep(every).await;
        }
    }

    /// Applies an edit; `expected` makes it fail with 409 unless the scene
    /// is still at that revision.
    pub async fn edit(&self, command: &EditCommand, expected: Option<u64>) -> Result<EditResponse, ClientError> {
        let mut req = self.http.post(self.url("/v1/edits")).json(command);
        if let Some(rev) = expected {
            req = req.header(reqwest::header::IF_MATCH, format!("\"{rev}\""));
        }
        json(req.send().await?).await
    }

    pub async fn preview(&self, camera: &PerspCamera) -> Result<Vec<u8>, ClientError> {
        let resp = self.http.get(self.url("/v1/preview")).query(&[("cam", format_camera(camera))]).send().await?;
        Ok(checked(resp).await?.bytes().await?.to_vec())
    }

    /// PNG of the scene panorama, or of the empty room with `empty`.
    pub async fn panorama(&self, empty: bool) -> Result<Vec<u8>, ClientError> {
        let kind = if empty { "empty" } else { "scene" };
        let resp = self.http.get(self.url("/v1/panorama")).query(&[("kind", kind)]).send().await?;
        Ok(checked(resp).await?.bytes().await?.to_vec())
    }

    async fn cloud_response(&self, owner: Option<&str>) -> Result<Response, ClientError> {
        let mut req = self.http.get(self.url("/v1/cloud"));
        if let Some(o) = owner {
            req = req.query(&[("owner", o)]);
        }
        checked(req.send().await?).await
    }

    /// The cloud (or one owner's partition) as PLY bytes.
    pub async fn cloud(&self, owner: Option<&str>) -> Result<Vec<u8>, ClientError> {
        Ok(self.cloud_response(owner).await?.bytes().await?.to_vec())
    }

    /// Streams the PLY cloud into `path`, returning the byte count.
    pub async fn download_cloud(&self, path: &Path, owner: Option<&str>) -> Result<u64, ClientError> {
        let mut resp = self.cloud_response(owner).await?;
        let mut file = tokio::fs::File::create(path).await?;
        let mut written = 0;
        while let Some(chunk) = resp.chunk().await? {
            file.write_all(&chunk).await?;
            written += chunk.len() as u64;
        }
        file.flush().await?;
        Ok(written)
    }

    pub async fn events(&self) -> Result<EventStream, ClientError> {
        let resp = checked(self.http.get(self.url("/v1/events")).send().await?).await?;
        Ok(EventStream { resp, buf: Vec::new() })
    }
}

/// Server-sent progress events.
pub struct EventStream {
    resp: Response,
    buf: Vec<u8>,
}

impl EventStream {
    /// Next event, or `None` when the server closes the stream.
    pub async fn next(&mut self) -> Result<Option<ServiceEvent>, ClientError> {
        loop {
            while let Some(end) = self.buf.windows(2).position(|w| w == b"\n\n") {
                let raw: Vec<u8> = self.buf.drain(..end + 2).collect();
                let frame = String::from_utf8_lossy(&raw);
                let data: Vec<&str> = frame.lines().filter_map(|l| l.strip_prefix("data:")).map(str::trim_start).collect();
                if !data.is_empty() {
                    return serde_json::from_str(&data.join("\n")).map(Some).map_err(|e| ClientError::Decode(e.to_string()));
                }
            }
            match self.resp.chunk().await? {
                Some(chunk) => self.buf.extend_from_slice(&chunk),
                None => return Ok(None),
            }
        }
    }
}
