use std::collections::HashMap;
use std::convert::Infallible;
use std::io::Write;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::map_response_with_state;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::mpsc;
use tokio_stream::wrappers::{BroadcastStream, ReceiverStream};
use tokio_stream::{Stream, StreamExt};

use scenepaint_core::io::ply::write_cloud;
use scenepaint_core::pipeline::{EditCommand, TexturedScene};
use scenepaint_core::projection::splat;
use scenepaint_core::raster::rgb_to_png;

use crate::api::{parse_camera, TextureRequest, REVISION_HEADER};
use crate::error::ApiError;
use crate::service::Service;

type AppState = Arc<Service>;

const CHUNK_BYTES: usize = 1 << 20;
const PREVIEW_BACKGROUND: [u8; 3] = [40, 40, 40];

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/scene", get(scene))
        .route("/v1/preview", get(preview))
        .route("/v1/panorama", get(panorama))
        .route("/v1/texture", post(texture))
        .route("/v1/jobs/{id}", get(job))
        .route("/v1/edits", post(edit))
        .route("/v1/cloud", get(cloud))
        .route("/v1/events", get(events))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) })
        .layer(map_response_with_state(service.clone(), stamp_revision))
        .with_state(service)
}

async fn stamp_revision(State(svc): State<AppState>, mut resp: Response) -> Response {
    if !resp.headers().contains_key(REVISION_HEADER) {
        resp.headers_mut().insert(REVISION_HEADER, HeaderValue::from(svc.revision()));
    }
    resp
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed request body: {e}")))
}

fn textured(svc: &Service) -> Result<Arc<TexturedScene>, ApiError> {
    svc.result().ok_or_else(|| ApiError::Conflict("the scene has not been textured yet".into()))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))
}

async fn scene(State(svc): State<AppState>) -> impl IntoResponse {
    Json(svc.describe())
}

async fn preview(State(svc): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let spec = q.get("cam").ok_or_else(|| ApiError::BadRequest("missing `cam` query parameter".into()))?;
    let cam = parse_camera(spec).map_err(|e| ApiError::BadRequest(format!("bad camera: {e}")))?;
    let ts = textured(&svc)?;
    let bytes = blocking(move || {
        let s = splat(&ts.cloud, &cam, 1);
        let mut img = s.image;
        for (px, &k) in img.data_mut().iter_mut().zip(s.known.data()) {
            if !k {
                *px = PREVIEW_BACKGROUND;
            }
        }
        rgb_to_png(&img)
    })
    .await?;
    Ok(png(bytes))
}

async fn panorama(State(svc): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let ts = textured(&svc)?;
    let empty = match q.get("kind").map(String::as_str) {
        None | Some("scene") => false,
        Some("empty") => true,
        Some(other) => return Err(ApiError::BadRequest(format!("kind must be `scene` or `empty`, not {other:?}"))),
    };
    let bytes = blocking(move || rgb_to_png(if empty { &ts.empty_panorama } else { &ts.panorama })).await?;
    Ok(png(bytes))
}

async fn texture(State(svc): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: TextureRequest = if body.iter().all(u8::is_ascii_whitespace) {
        TextureRequest::default()
    } else {
        parse_json(&body)?
    };
    let accepted = svc.submit_texture(request)?;
    Ok((StatusCode::ACCEPTED, Json(accepted)).into_response())
}

async fn job(State(svc): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id: u64 = id.parse().map_err(|_| ApiError::BadRequest(format!("job id must be a number, not {id:?}")))?;
    let status = svc.job(id).ok_or_else(|| ApiError::NotFound(format!("no job {id}")))?;
    Ok(Json(status).into_response())
}

fn expected_revision(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(value) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = value.to_str().unwrap_or_default().trim().trim_start_matches("W/").trim_matches('"');
    text.parse()
        .map(Some)
        .map_err(|_| ApiError::BadRequest(format!("If-Match must carry a scene revision, not {text:?}")))
}

async fn edit(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let command: EditCommand = parse_json(&body)?;
    let done = svc.submit_edit(command, expected).await?;
    let revision = done.revision;
    let mut resp = Json(done).into_response();
    // The revision this edit produced, not whatever the scene is at now.
    resp.headers_mut().insert(REVISION_HEADER, HeaderValue::from(revision));
    Ok(resp)
}

/// Forwards written bytes to a body channel in large chunks.
struct ChunkWriter {
    tx: mpsc::Sender<Result<Bytes, std::io::Error>>,
    buf: Vec<u8>,
}

impl ChunkWriter {
    fn send(&mut self) -> std::io::Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        let chunk = Bytes::from(std::mem::replace(&mut self.buf, Vec::with_capacity(CHUNK_BYTES)));
        self.tx
            .blocking_send(Ok(chunk))
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "client went away"))
    }
}

impl Write for ChunkWriter {
    fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
        self.buf.extend_from_slice(data);
        if self.buf.len() >= CHUNK_BYTES {
            self.send()?;
        }
        Ok(data.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.send()
    }
}

/// The cloud as a binary PLY stream; `owner` limits it to one partition.
async fn cloud(State(svc): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let ts = textured(&svc)?;
    let slot = match q.get("owner") {
        Some(name) => Some(ts.owners.get(name).ok_or_else(|| ApiError::NotFound(format!("no owner {name:?}")))?),
        None => None,
    };
    let (tx, rx) = mpsc::channel(4);
    tokio::task::spawn_blocking(move || {
        let filtered = slot.map(|s| ts.cloud.owned_by(s));
        let cloud = filtered.as_ref().unwrap_or(&ts.cloud);
        let mut w = ChunkWriter {
            tx,
            buf: Vec::with_capacity(CHUNK_BYTES),
        };
        if let Err(e) = write_cloud(&mut w, cloud, ts.owners.names()).and_then(|_| w.flush()) {
            tracing::debug!("cloud stream ended early: {e}");
        }
    });
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], Body::from_stream(ReceiverStream::new(rx))).into_response())
}

async fn events(State(svc): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let stream = BroadcastStream::new(svc.subscribe()).filter_map(|msg| {
        // Lagging subscribers skip what they missed.
        let ev = msg.ok()?;
        Some(Ok(Event::default().event("progress").data(serde_json::to_string(&ev).ok()?)))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}
