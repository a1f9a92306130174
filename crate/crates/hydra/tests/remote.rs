use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use hydra::core::embed::EmbedError;
use hydra::core::{EmbeddingProvider, FunctionRecord, EMBEDDING_DIM};
use hydra::remote::RemoteEmbedder;
use serde_json::{json, Value};

type Handler = dyn Fn(&Value) -> (u16, String) + Send + Sync;

/// Serves `/embed` on an ephemeral port with `workers` handler threads.
fn serve(workers: usize, handler: Arc<Handler>) -> String {
    let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
    let addr = server.server_addr().to_ip().unwrap();
    for _ in 0..workers {
        let server = Arc::clone(&server);
        let handler = Arc::clone(&handler);
        thread::spawn(move || {
            for mut req in server.incoming_requests() {
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let (status, text) = if req.url() != "/embed" || *req.method() != tiny_http::Method::Post {
                    (404, json!({"error": "not found"}).to_string())
                } else {
                    match serde_json::from_str::<Value>(&body) {
                        Ok(v) => handler(&v),
                        Err(_) => (400, json!({"error": "malformed body"}).to_string()),
                    }
                };
                let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(status));
            }
        });
    }
    format!("http://{addr}")
}

fn vector_for(code: &str, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i + code.len()) as f64 * 0.013).sin() * 3.0).collect()
}

fn record(id: &str) -> FunctionRecord {
    FunctionRecord::new(id, "p", None, "int f(void)\n{\n\treturn 0;\n}")
}

fn echo(n: usize) -> Arc<Handler> {
    Arc::new(move |v: &Value| {
        let code = v["code"].as_str().unwrap_or_default();
        (200, json!({"id": v["id"], "model": "demo-model:mean", "vector": vector_for(code, n)}).to_string())
    })
}

#[test]
fn accepts_768_finite_values_unchanged() {
    let url = serve(1, echo(EMBEDDING_DIM));
    let client = RemoteEmbedder::new(&url, Duration::from_secs(5), 4);
    let r = record("fn-1");
    let e = client.embed(&r).unwrap();
    assert_eq!(e.values(), vector_for(&r.normalized_source, EMBEDDING_DIM).as_slice());
    assert_eq!(e.function_id, "fn-1");
    assert_eq!(e.provider_id, "remote:demo-model:mean");
    assert_eq!(client.provider_id(), "remote:demo-model:mean");
}

#[test]
fn wrong_length_is_a_bad_response() {
    let url = serve(1, echo(512));
    let client = RemoteEmbedder::new(&url, Duration::from_secs(5), 4);
    assert!(matches!(client.embed(&record("a")), Err(EmbedError::BridgeBadResponse(m)) if m.contains("512")));
}

#[test]
fn non_finite_and_malformed_bodies_are_bad_responses() {
    let url = serve(
        1,
        Arc::new(|v: &Value| {
            let id = v["id"].as_str().unwrap().to_string();
            let mut vector: Vec<String> = vec!["0.5".into(); EMBEDDING_DIM];
            match id.as_str() {
                "overflow" => vector[3] = "1e999".into(),
                "garbage" => return (200, "not json".into()),
                "wrong-id" => return (200, json!({"id": "other", "model": "m", "vector": vec![0.0; EMBEDDING_DIM]}).to_string()),
                _ => {}
            }
            (200, format!("{{\"id\":\"{id}\",\"model\":\"m\",\"vector\":[{}]}}", vector.join(",")))
        }),
    );
    let client = RemoteEmbedder::new(&url, Duration::from_secs(5), 4);
    for id in ["overflow", "garbage", "wrong-id"] {
        assert!(matches!(client.embed(&record(id)), Err(EmbedError::BridgeBadResponse(_))), "{id}");
    }
    assert!(client.embed(&record("fine")).is_ok());
}

#[test]
fn error_status_carries_the_service_message() {
    let url = serve(1, Arc::new(|_: &Value| (422, json!({"error": "empty code"}).to_string())));
    let client = RemoteEmbedder::new(&url, Duration::from_secs(5), 4);
    match client.embed(&record("a")) {
        Err(EmbedError::BridgeBadResponse(m)) => assert!(m.contains("422") && m.contains("empty code"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unreachable_service() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let client = RemoteEmbedder::new(&format!("http://127.0.0.1:{port}"), Duration::from_secs(2), 4);
    assert!(matches!(client.embed(&record("a")), Err(EmbedError::BridgeUnreachable(_))));
}

#[test]
fn slow_service_times_out() {
    let url = serve(
        1,
        Arc::new(|v: &Value| {
            thread::sleep(Duration::from_millis(1500));
            (200, json!({"id": v["id"], "model": "m", "vector": vec![0.0; EMBEDDING_DIM]}).to_string())
        }),
    );
    let client = RemoteEmbedder::new(&url, Duration::from_millis(200), 4);
    assert!(matches!(client.embed(&record("a")), Err(EmbedError::Timeout)));
}

#[test]
fn in_flight_requests_are_bounded() {
    let current = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (c, p) = (Arc::clone(&current), Arc::clone(&peak));
    let url = serve(
        8,
        Arc::new(move |v: &Value| {
            let now = c.fetch_add(1, Ordering::SeqCst) + 1;
            p.fetch_max(now, Ordering::SeqCst);
            thread::sleep(Duration::from_millis(40));
            c.fetch_sub(1, Ordering::SeqCst);
            (200, json!({"id": v["id"], "model": "m", "vector": vec![0.25; EMBEDDING_DIM]}).to_string())
        }),
    );
    let client = RemoteEmbedder::new(&url, Duration::from_secs(10), 2);
    thread::scope(|s| {
        for i in 0..12 {
            let client = &client;
            s.spawn(move || client.embed(&record(&format!("f{i}"))).unwrap());
        }
    });
    let peak = peak.load(Ordering::SeqCst);
    assert!((1..=2).contains(&peak), "peak {peak}");
}

#[test]
fn parallel_extraction_with_remote_provider_keeps_order() {
    use hydra::core::{Corpus, RuleSet, SourceKind};
    use hydra::features::extract_features_parallel;
    let url = serve(4, echo(EMBEDDING_DIM));
    let client = RemoteEmbedder::new(&url, Duration::from_secs(5), 4);
    let records: Vec<FunctionRecord> = (0..20)
        .map(|i| FunctionRecord::new(format!("f{i}"), "p", None, "x".repeat(i + 1) + ";"))
        .collect();
    let corpus = Corpus::new("c", SourceKind::CsvDataset, records, 0).unwrap();
    let f = extract_features_parallel(&corpus, &RuleSet::default_rules(), Some(&client), 4).unwrap();
    let e = f.embeddings.unwrap();
    for (i, r) in corpus.records().iter().enumerate() {
        assert_eq!(e[i].function_id, r.id);
        assert_eq!(e[i].values(), vector_for(&r.normalized_source, EMBEDDING_DIM).as_slice());
    }
    assert_eq!(f.provider_id.as_deref(), Some("remote:demo-model:mean"));
}
