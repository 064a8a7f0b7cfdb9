mod common;

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use proptest::prelude::*;
use scenepaint_core::painter::{
    paint_checked, MockPainter, NullScorer, PaintError, PaintRequest, Painter, RemoteConfig, RemotePainter,
    RemoteScorer, Scorer, WireRequest, WireResponse,
};
use scenepaint_core::painter::scorer::{ScoreRequest, ScoreResponse};
use scenepaint_core::painter::wire::request_bytes;
use scenepaint_core::raster::{BitMask, DepthMap, RgbImage};

use common::fnv1a64;

/// Reference HSV conversion at the mock's saturation and value.
fn oracle_color(prompt: &str, band: u8) -> [u8; 3] {
    let mut bytes = prompt.as_bytes().to_vec();
    bytes.extend([0, band]);
    let hue = (fnv1a64(&bytes) % 360) as f64;
    let (s, v) = (0.6, 0.8);
    let c = v * s;
    let hp = hue / 60.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r, g, b) = if hp < 1.0 {
        (c, x, 0.0)
    } else if hp < 2.0 {
        (x, c, 0.0)
    } else if hp < 3.0 {
        (0.0, c, x)
    } else if hp < 4.0 {
        (0.0, x, c)
    } else if hp < 5.0 {
        (x, 0.0, c)
    } else {
        (c, 0.0, x)
    };
    [r, g, b].map(|ch| ((ch + v - c) * 255.0).round() as u8)
}

#[test]
fn two_depth_bands_give_two_hashed_colors() {
    // Inverse depth 1/1 vs 1/4 normalizes to 65535 (band 7) and 0 (band 0).
    let depth = DepthMap::from_fn(16, 8, |x, _| if x < 8 { 1.0 } else { 4.0 });
    let res = MockPainter.paint(&PaintRequest::generate(&depth, "p", "", 3)).unwrap();
    let first = &res.candidates[0];
    for y in 0..8 {
        for x in 0..16 {
            let band = if x < 8 { 7 } else { 0 };
            assert_eq!(*first.get(x, y), oracle_color("p", band), "pixel {x},{y}");
        }
    }
    assert_ne!(oracle_color("p", 7), oracle_color("p", 0));
}

fn sample_request(sketch: bool) -> PaintRequest {
    let depth = DepthMap::from_fn(12, 10, |x, y| 1.0 + 0.2 * x as f64 + 0.1 * y as f64);
    let base = RgbImage::from_fn(12, 10, |x, y| [x as u8 * 20, y as u8 * 20, 7]);
    let mask = BitMask::from_fn(12, 10, |x, y| x > 3 && y > 2);
    let req = PaintRequest::inpaint(base, mask.clone(), &depth, "a worn leather chair", "blurry", 77);
    if sketch {
        req.with_sketch(BitMask::from_fn(12, 10, |x, y| x == y))
    } else {
        req
    }
}

#[test]
fn wire_envelope_round_trips() {
    for sketch in [false, true] {
        let req = sample_request(sketch);
        let bytes = request_bytes(&req);
        let parsed: WireRequest = serde_json::from_slice(&bytes).unwrap();
        let back = parsed.to_request().unwrap();
        assert_eq!(back, req);
        assert_eq!(request_bytes(&back), bytes);
    }
}

#[derive(Default)]
struct StubState {
    calls: AtomicU32,
    fail_first: u32,
    wrong_size: bool,
    auth: Mutex<Vec<Option<String>>>,
}

async fn paint_stub(
    State(st): State<Arc<StubState>>,
    headers: HeaderMap,
    Json(body): Json<WireRequest>,
) -> Result<Json<WireResponse>, (StatusCode, String)> {
    let call = st.calls.fetch_add(1, Ordering::SeqCst);
    st.auth
        .lock()
        .unwrap()
        .push(headers.get("authorization").map(|v| v.to_str().unwrap().to_string()));
    if call < st.fail_first {
        return Err((StatusCode::SERVICE_UNAVAILABLE, "warming up".into()));
    }
    let req = body.to_request().map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()))?;
    let mut out = MockPainter.paint(&req).unwrap().candidates;
    if st.wrong_size {
        out[1] = RgbImage::filled(4, 4, [0, 0, 0]);
    }
    Ok(Json(WireResponse::from_images(&out)))
}

async fn score_stub(Json(body): Json<ScoreRequest>) -> Json<ScoreResponse> {
    Json(ScoreResponse { score: body.prompt.chars().count() as f64 / 100.0 })
}

/// Serves the stub on an ephemeral port from a background runtime.
fn spawn_stub(state: StubState) -> (String, Arc<StubState>) {
    let state = Arc::new(state);
    let app = Router::new()
        .route("/v1/paint", post(paint_stub))
        .route("/v1/score", post(score_stub))
        .with_state(state.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (format!("http://{}", rx.recv().unwrap()), state)
}

#[test]
fn remote_painter_matches_mock_through_the_stub() {
    let (url, st) = spawn_stub(StubState::default());
    let mut cfg = RemoteConfig::new(url);
    cfg.api_key = Some("s3cret".into());
    let remote = RemotePainter::new(cfg);
    let req = sample_request(true);
    let got = paint_checked(&remote, &req).unwrap();
    let want = paint_checked(&MockPainter, &req).unwrap();
    assert_eq!(got.result.candidates, want.result.candidates);
    assert_eq!(st.auth.lock().unwrap().as_slice(), &[Some("Bearer s3cret".to_string())]);
}

#[test]
fn remote_painter_retries_server_errors() {
    let (url, st) = spawn_stub(StubState { fail_first: 2, ..Default::default() });
    let remote = RemotePainter::new(RemoteConfig::new(url));
    assert!(remote.paint(&sample_request(false)).is_ok());
    assert_eq!(st.calls.load(Ordering::SeqCst), 3);
    assert_eq!(st.auth.lock().unwrap()[0], None);

    let (url, st) = spawn_stub(StubState { fail_first: 5, ..Default::default() });
    let err = RemotePainter::new(RemoteConfig::new(url)).paint(&sample_request(false)).unwrap_err();
    assert!(matches!(err, PaintError::Status { status: 503, attempts: 3, .. }), "{err:?}");
    assert_eq!(st.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn remote_resolution_mismatch_is_rejected() {
    let (url, _) = spawn_stub(StubState { wrong_size: true, ..Default::default() });
    let err = RemotePainter::new(RemoteConfig::new(url)).paint(&sample_request(false)).unwrap_err();
    assert!(
        matches!(err, PaintError::Resolution { index: 1, expected: (12, 10), got: (4, 4) }),
        "{err:?}"
    );
}

#[test]
fn unreachable_backend_reports_attempts() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let err = RemotePainter::new(RemoteConfig::new(url)).paint(&sample_request(false)).unwrap_err();
    assert!(matches!(err, PaintError::Transport { attempts: 3, .. }), "{err:?}");
}

#[test]
fn remote_scorer_uses_the_echo_stub_and_degrades_to_zero() {
    let (url, _) = spawn_stub(StubState::default());
    let prompt = "a".repeat(42);
    let img = RgbImage::filled(4, 4, [1, 2, 3]);
    assert!((RemoteScorer::new(RemoteConfig::new(url)).score(&img, &prompt) - 0.42).abs() < 1e-12);
    assert_eq!(RemoteScorer::new(RemoteConfig::new("http://127.0.0.1:9")).score(&img, &prompt), 0.0);
    assert_eq!(NullScorer.score(&img, &prompt), 0.0);
}

/// A backend that ignores the mask entirely.
struct Sloppy;

impl Painter for Sloppy {
    fn identity(&self) -> String {
        "sloppy".into()
    }

    fn paint(&self, req: &PaintRequest) -> Result<scenepaint_core::painter::PaintResult, PaintError> {
        let img = RgbImage::filled(req.width(), req.height(), [255, 0, 255]);
        Ok(scenepaint_core::painter::PaintResult {
            candidates: vec![img; req.candidates as usize],
            backend: self.identity(),
            elapsed: std::time::Duration::ZERO,
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn out_of_mask_pixels_equal_the_base(
        mask in prop::collection::vec(any::<bool>(), 80),
        base in prop::collection::vec(any::<[u8; 3]>(), 80),
        seed in any::<u64>(),
    ) {
        let depth = DepthMap::from_fn(10, 8, |x, y| 0.5 + x as f64 * 0.3 + y as f64 * 0.05);
        let mask = BitMask::from_vec(10, 8, mask);
        let base = RgbImage::from_vec(10, 8, base);
        let req = PaintRequest::inpaint(base.clone(), mask.clone(), &depth, "p", "", seed);
        for painter in [&MockPainter as &dyn Painter, &Sloppy] {
            let out = paint_checked(painter, &req).unwrap();
            for c in &out.result.candidates {
                for (x, y) in mask.not().coords() {
                    prop_assert_eq!(c.get(x, y), base.get(x, y));
                }
            }
        }
        // The mock honors the contract on its own, before enforcement.
        let raw = MockPainter.paint(&req).unwrap();
        for c in &raw.candidates {
            for (x, y) in mask.not().coords() {
                prop_assert_eq!(c.get(x, y), base.get(x, y));
            }
        }
    }

    #[test]
    fn mock_is_a_function_of_the_request_bytes(seed in any::<u64>(), sketch in any::<bool>()) {
        let mut a = sample_request(sketch);
        a.seed = seed;
        let b: WireRequest = serde_json::from_slice(&request_bytes(&a)).unwrap();
        prop_assert_eq!(
            MockPainter.paint(&a).unwrap().candidates,
            MockPainter.paint(&b.to_request().unwrap()).unwrap().candidates
        );
    }
}
