//! HttpTransport against a local mock service.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::{HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::post;
use axum::{Json, Router};
use qasrl::providers::{HttpTransport, ProviderEndpoint, ServiceProvider, Transport};
use qasrl_core::providers::{ProviderError, QuestionEmbedder};
use serde_json::{json, Value};

struct Mock {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    _rt: tokio::runtime::Runtime,
}

/// `/embed` fails with 503 for the first `failures` calls; `/parse` always
/// answers 422; `/align` needs the bearer token "s3cret".
fn mock(failures: usize) -> Mock {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    let app = Router::new()
        .route(
            "/embed",
            post(move |Json(body): Json<Value>| {
                let h = h.clone();
                async move {
                    let n = h.fetch_add(1, Ordering::SeqCst);
                    if n < failures {
                        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({}))).into_response();
                    }
                    let q = body["question"].as_str().unwrap_or_default().len() as f64;
                    Json(json!({ "vector": [q, 1.0] })).into_response()
                }
            }),
        )
        .route("/parse", post(|| async { (StatusCode::UNPROCESSABLE_ENTITY, "bad tokens") }))
        .route(
            "/align",
            post(|headers: HeaderMap| async move {
                match headers.get("authorization").and_then(|v| v.to_str().ok()) {
                    Some("Bearer s3cret") => Json(json!({ "pairs": [[0, 0]] })).into_response(),
                    _ => StatusCode::UNAUTHORIZED.into_response(),
                }
            }),
        );
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
    Mock { addr, hits, _rt: rt }
}

fn endpoint(m: &Mock, retries: u32) -> ProviderEndpoint {
    ProviderEndpoint { max_retries: retries, backoff_ms: 5, timeout_secs: 5, ..ProviderEndpoint::new(format!("http://{}", m.addr)) }
}

#[test]
fn retries_through_transient_failures() {
    let m = mock(2);
    let p = ServiceProvider::new(HttpTransport::new(endpoint(&m, 3)).unwrap());
    assert_eq!(p.embed("abc").unwrap(), vec![3.0, 1.0]);
    assert_eq!(m.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn exhausted_retries_are_transport_errors() {
    let m = mock(10);
    let t = HttpTransport::new(endpoint(&m, 2)).unwrap();
    let err = t.call("/embed", &json!({"question": "q"}), "q").unwrap_err();
    assert!(err.is_transport(), "{err}");
    assert!(err.to_string().contains("after 3 attempts"), "{err}");
    assert_eq!(m.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_content_errors_without_retry() {
    let m = mock(0);
    let t = HttpTransport::new(endpoint(&m, 3)).unwrap();
    let err = t.call("/parse", &json!({}), "s1").unwrap_err();
    assert!(matches!(err, ProviderError::Content { .. }), "{err}");
    assert!(err.to_string().contains("422"), "{err}");
}

#[test]
fn bearer_token_from_environment() {
    let m = mock(0);
    let mut ep = endpoint(&m, 0);
    let without = HttpTransport::new(ep.clone()).unwrap();
    assert!(without.call("/align", &json!({}), "x").is_err());
    // only this test reads the variable
    std::env::set_var("QASRL_HTTP_TEST_TOKEN", "s3cret");
    ep.auth_token_env = Some("QASRL_HTTP_TEST_TOKEN".into());
    let with = HttpTransport::new(ep).unwrap();
    assert_eq!(with.call("/align", &json!({}), "x").unwrap(), json!({"pairs": [[0, 0]]}));
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let ep = ProviderEndpoint { max_retries: 1, backoff_ms: 1, timeout_secs: 2, ..ProviderEndpoint::new("http://127.0.0.1:9") };
    let err = HttpTransport::new(ep).unwrap().call("/embed", &json!({}), "q").unwrap_err();
    assert!(err.is_transport(), "{err}");
}
