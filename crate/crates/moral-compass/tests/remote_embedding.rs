//! Exercises the remote-embedding wire protocol against a stub server
//! that speaks the sidecar contract: POST /embed with {"texts": [...]}
//! answered by {"dim": N, "vectors": [[...]]}, plus GET /healthz.
//! The stub can misbehave on demand so every failure path is covered.

use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use moral_compass::{
    probe_health, BackendKind, Config, Embedder, Error, Service, TextEmbedder,
};
use parking_lot::Mutex;
use serde_json::{json, Value};

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Normal,
    Error500,
    MangledJson,
    ShortRow,
    HugeNumber,
    ZeroVector,
    OffNorm,
    WrongCount,
}

struct StubState {
    mode: Mutex<Mode>,
    dim: AtomicUsize,
    requests: AtomicUsize,
    batches: Mutex<Vec<Vec<String>>>,
}

struct Stub {
    state: Arc<StubState>,
    addr: SocketAddr,
}

impl Stub {
    fn spawn(dim: usize) -> Self {
        let state = Arc::new(StubState {
            mode: Mutex::new(Mode::Normal),
            dim: AtomicUsize::new(dim),
            requests: AtomicUsize::new(0),
            batches: Mutex::new(Vec::new()),
        });
        let app_state = state.clone();
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .expect("stub runtime");
            runtime.block_on(async move {
                let router = Router::new()
                    .route("/embed", post(embed_handler))
                    .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
                    .with_state(app_state);
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
                    .await
                    .expect("stub bind");
                tx.send(listener.local_addr().expect("stub addr")).ok();
                axum::serve(listener, router).await.expect("stub serve");
            });
        });
        let addr = rx.recv().expect("stub reports its address");
        Self { state, addr }
    }

    fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    fn set_mode(&self, mode: Mode) {
        *self.state.mode.lock() = mode;
    }

    fn set_dim(&self, dim: usize) {
        self.state.dim.store(dim, Ordering::SeqCst);
    }

    fn requests(&self) -> usize {
        self.state.requests.load(Ordering::SeqCst)
    }

    fn batches(&self) -> Vec<Vec<String>> {
        self.state.batches.lock().clone()
    }
}

/// Deterministic nonzero vector for a text; nothing like the library's
/// own backend on purpose.
fn stub_vector(text: &str, dim: usize) -> Vec<f64> {
    let mut seed = 0x5DEECE66Du64;
    for b in text.bytes() {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(b as u64);
    }
    let mut row: Vec<f64> = (0..dim)
        .map(|_| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut row {
        *v /= norm;
    }
    row
}

async fn embed_handler(
    State(state): State<Arc<StubState>>,
    Json(body): Json<Value>,
) -> axum::response::Response {
    state.requests.fetch_add(1, Ordering::SeqCst);
    let texts: Vec<String> = body["texts"]
        .as_array()
        .map(|a| a.iter().filter_map(|t| t.as_str().map(String::from)).collect())
        .unwrap_or_default();
    state.batches.lock().push(texts.clone());

    let dim = state.dim.load(Ordering::SeqCst);
    let mode = *state.mode.lock();
    match mode {
        Mode::Error500 => (StatusCode::INTERNAL_SERVER_ERROR, "backend on fire").into_response(),
        Mode::MangledJson => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            "{\"dim\": 4, \"vectors\": [[0.5,",
        )
            .into_response(),
        Mode::HugeNumber => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            format!(
                "{{\"dim\": {dim}, \"vectors\": [{}]}}",
                texts
                    .iter()
                    .map(|_| {
                        let mut row = vec!["1e999".to_string(); dim];
                        row[0] = "0.5".to_string();
                        format!("[{}]", row.join(","))
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        )
            .into_response(),
        _ => {
            let mut rows: Vec<Vec<f64>> =
                texts.iter().map(|t| stub_vector(t, dim)).collect();
            match mode {
                Mode::ShortRow => {
                    if let Some(first) = rows.first_mut() {
                        first.pop();
                    }
                }
                Mode::ZeroVector => {
                    if let Some(first) = rows.first_mut() {
                        first.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                Mode::OffNorm => {
                    // Off by 8e-6: inside the protocol's 1e-5 tolerance,
                    // outside the library's 1e-6 vector invariant.
                    for row in &mut rows {
                        for v in row.iter_mut() {
                            *v *= 1.0 + 8e-6;
                        }
                    }
                }
                Mode::WrongCount => {
                    rows.push(vec![0.0; dim]);
                }
                _ => {}
            }
            Json(json!({"dim": dim, "vectors": rows})).into_response()
        }
    }
}

fn remote(stub: &Stub) -> Embedder {
    Embedder::remote(stub.endpoint(), 100).unwrap()
}

#[test]
fn learns_the_dimension_from_the_first_response() {
    let stub = Stub::spawn(24);
    let embedder = remote(&stub);
    assert_eq!(embedder.dim(), None, "dimension unknown before first call");
    let vector = embedder.embed("should i sail west?").unwrap();
    assert_eq!(vector.dim(), 24);
    assert_eq!(embedder.dim(), Some(24));
    let norm: f64 = vector.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-9);
}

#[test]
fn cache_absorbs_repeat_lookups() {
    let stub = Stub::spawn(8);
    let embedder = remote(&stub);
    let first = embedder.embed("should i repeat myself?").unwrap();
    let again = embedder.embed("Should   I REPEAT myself?").unwrap(); // same after normalization
    assert_eq!(first, again);
    assert_eq!(stub.requests(), 1, "second lookup must be served from cache");
}

#[test]
fn batches_are_deduplicated_before_the_wire() {
    let stub = Stub::spawn(8);
    let embedder = remote(&stub);
    let vectors = embedder.embed_batch(&["apple", "banana", "Apple"]).unwrap();
    assert_eq!(vectors.len(), 3);
    assert_eq!(vectors[0], vectors[2]);
    assert_eq!(stub.requests(), 1);
    assert_eq!(stub.batches(), vec![vec!["apple".to_string(), "banana".to_string()]]);
}

#[test]
fn dimension_change_is_rejected_mid_stream() {
    let stub = Stub::spawn(8);
    let embedder = remote(&stub);
    embedder.embed("first question").unwrap();
    stub.set_dim(16);
    let err = embedder.embed("second question").unwrap_err();
    match err {
        Error::DimensionMismatch { expected, got } => {
            assert_eq!(expected, 8);
            assert_eq!(got, 16);
        }
        other => panic!("expected DimensionMismatch, got {other:?}"),
    }
}

#[test]
fn server_errors_surface_as_backend_unavailable() {
    let stub = Stub::spawn(8);
    let embedder = remote(&stub);
    stub.set_mode(Mode::Error500);
    assert!(matches!(
        embedder.embed("anyone home?").unwrap_err(),
        Error::BackendUnavailable(_)
    ));
}

#[test]
fn mangled_payloads_surface_as_backend_unavailable() {
    let stub = Stub::spawn(8);
    let embedder = remote(&stub);
    stub.set_mode(Mode::MangledJson);
    assert!(matches!(
        embedder.embed("speak json please").unwrap_err(),
        Error::BackendUnavailable(_)
    ));
}

#[test]
fn non_finite_values_surface_as_backend_unavailable() {
    let stub = Stub::spawn(4);
    let embedder = remote(&stub);
    stub.set_mode(Mode::HugeNumber);
    assert!(matches!(
        embedder.embed("overflow me").unwrap_err(),
        Error::BackendUnavailable(_)
    ));
}

#[test]
fn zero_vectors_surface_as_backend_unavailable() {
    let stub = Stub::spawn(4);
    let embedder = remote(&stub);
    stub.set_mode(Mode::ZeroVector);
    assert!(matches!(
        embedder.embed("nothing to say").unwrap_err(),
        Error::BackendUnavailable(_)
    ));
}

#[test]
fn short_rows_surface_as_dimension_mismatch() {
    let stub = Stub::spawn(8);
    let embedder = remote(&stub);
    stub.set_mode(Mode::ShortRow);
    match embedder.embed("how long are you?").unwrap_err() {
        Error::DimensionMismatch { expected, got } => {
            assert_eq!(expected, 8);
            assert_eq!(got, 7);
        }
        other => panic!("expected DimensionMismatch, got {other:?}"),
    }
}

#[test]
fn vector_count_mismatch_surfaces_as_backend_unavailable() {
    let stub = Stub::spawn(8);
    let embedder = remote(&stub);
    stub.set_mode(Mode::WrongCount);
    assert!(matches!(
        embedder.embed("one in, two out").unwrap_err(),
        Error::BackendUnavailable(_)
    ));
}

#[test]
fn slightly_off_norm_rows_are_renormalized_and_accepted() {
    let stub = Stub::spawn(16);
    let embedder = remote(&stub);
    stub.set_mode(Mode::OffNorm);
    let vector = embedder.embed("almost unit length").unwrap();
    let norm: f64 = vector.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-12, "client must renormalize: {norm}");
}

#[test]
fn unreachable_backend_fails_probe_and_embed() {
    // Bind then drop a listener so the port is valid but closed.
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let endpoint = format!("http://127.0.0.1:{port}");
    assert!(matches!(
        probe_health(&endpoint).unwrap_err(),
        Error::BackendUnavailable(_)
    ));
    let embedder = Embedder::remote(&endpoint, 10).unwrap();
    assert!(matches!(
        embedder.embed("hello?").unwrap_err(),
        Error::BackendUnavailable(_)
    ));
}

#[test]
fn probe_health_accepts_a_live_backend() {
    let stub = Stub::spawn(8);
    probe_health(&stub.endpoint()).unwrap();
    // Trailing slash is tolerated.
    probe_health(&format!("{}/", stub.endpoint())).unwrap();
}

#[test]
fn full_service_runs_against_a_remote_backend() {
    let stub = Stub::spawn(32);
    let dir = tempfile::tempdir().unwrap();
    let mut config = Config::default();
    config.backend = BackendKind::Remote;
    config.endpoint = Some(stub.endpoint());
    config.storage_dir = dir.path().join("data");
    config.bank_path = dir.path().join("bank.txt");
    config.feedback_probability = 0.0;

    let service = Service::new(&config).unwrap();
    let session = service.create_session();
    let plan = service.ask(&session, "should i trust the network?").unwrap();
    assert!(plan.answer_text.contains("trust the network"));
    assert!(stub.requests() >= 1);

    // Same question again: every needed text is cached, no new traffic.
    let before = stub.requests();
    let again = service.ask(&session, "should i trust the network?").unwrap();
    assert_eq!(again.verdict, plan.verdict);
    assert_eq!(stub.requests(), before);
}

#[test]
fn startup_fails_fast_when_the_backend_is_down() {
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut config = Config::default();
    config.backend = BackendKind::Remote;
    config.endpoint = Some(format!("http://127.0.0.1:{port}"));
    config.storage_dir = dir.path().join("data");
    config.bank_path = dir.path().join("bank.txt");

    let err = match Service::new(&config) {
        Ok(_) => panic!("startup must fail while the backend is down"),
        Err(e) => e,
    };
    assert!(matches!(err, Error::BackendUnavailable(_)));
    assert_eq!(err.exit_code(), 2);
}
