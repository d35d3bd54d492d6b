//! The HTTP backend against a real local server: wire schema on the way
//! out, retry-then-succeed, and auth failure propagation over ureq.

use std::sync::mpsc;
use std::time::Duration;

use spectrabench::backend::{
    Backend, GenerationParams, HttpBackend, HttpBackendConfig, ModelRequest,
};

fn request() -> ModelRequest {
    ModelRequest {
        model_id: "wire-model".into(),
        instruction_text: "Classify the scene.".into(),
        images: vec![vec![1, 2, 3, 4]],
        params: GenerationParams::default(),
    }
}

struct Served {
    body: serde_json::Value,
    authorization: Option<String>,
}

/// Serves scripted (status, body) responses and reports what it saw.
fn serve(
    responses: Vec<(u16, &'static str)>,
) -> (String, mpsc::Receiver<Served>, std::thread::JoinHandle<()>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", server.server_addr());
    let (tx, rx) = mpsc::channel();
    let handle = std::thread::spawn(move || {
        for (status, body) in responses {
            let Ok(mut request) = server.recv() else {
                return;
            };
            let mut seen = Vec::new();
            let _ = request.as_reader().read_to_end(&mut seen);
            let authorization = request
                .headers()
                .iter()
                .find(|h| h.field.equiv("authorization"))
                .map(|h| h.value.as_str().to_string());
            let _ = tx.send(Served {
                body: serde_json::from_slice(&seen).unwrap_or(serde_json::Value::Null),
                authorization,
            });
            let response = tiny_http::Response::from_string(body).with_status_code(status);
            let _ = request.respond(response);
        }
    });
    (url, rx, handle)
}

fn config(url: &str, max_attempts: u32) -> HttpBackendConfig {
    HttpBackendConfig {
        endpoint: url.to_string(),
        model_id: "wire-model".into(),
        api_key: Some("sekrit".into()),
        max_attempts,
        timeout: Duration::from_secs(10),
        backoff_base: Duration::from_millis(1),
        ..Default::default()
    }
}

#[test]
fn sends_multimodal_schema_and_reads_candidates() {
    let (url, rx, handle) = serve(vec![(
        200,
        r#"{"candidates":[{"content":{"parts":[{"text":"ANSWER: Forest"}]}}]}"#,
    )]);
    let backend = HttpBackend::with_ureq(config(&url, 1));
    let response = backend.send(&request()).unwrap();
    assert_eq!(response.text, "ANSWER: Forest");
    assert!(!response.from_cache);

    let served = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!(served.body["model"], "wire-model");
    assert_eq!(
        served.body["contents"][0]["parts"][0]["text"],
        "Classify the scene."
    );
    assert_eq!(
        served.body["contents"][0]["parts"][1]["inline_data"]["mime_type"],
        "image/png"
    );
    assert_eq!(served.body["generation_config"]["max_output_tokens"], 8192);
    assert_eq!(served.authorization.as_deref(), Some("Bearer sekrit"));
    handle.join().unwrap();
}

#[test]
fn retries_5xx_then_succeeds() {
    let (url, rx, handle) = serve(vec![(503, "overloaded"), (200, r#"{"text":"second try"}"#)]);
    let backend = HttpBackend::with_ureq(config(&url, 3));
    let response = backend.send(&request()).unwrap();
    assert_eq!(response.text, "second try");
    assert_eq!(rx.iter().take(2).count(), 2);
    handle.join().unwrap();
}

#[test]
fn auth_rejection_is_fatal() {
    let (url, _rx, handle) = serve(vec![(403, "no")]);
    let backend = HttpBackend::with_ureq(config(&url, 5));
    let err = backend.send(&request()).unwrap_err();
    assert!(matches!(
        err,
        spectrabench::backend::BackendError::Auth { status: 403 }
    ));
    handle.join().unwrap();
}
