use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use geodex::fetch::{fetch_embeddings, read_prompts, EndpointConfig, Prompt};
use geodex::GeodexError;
use serde_json::{json, Value};

type Handler = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

struct Stub {
    url: String,
    requests: Arc<AtomicUsize>,
    auth: Arc<Mutex<Vec<String>>>,
}

/// Minimal HTTP/1.1 server; `handler` gets the request number and JSON body.
fn stub(handler: Box<Handler>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let auth = Arc::new(Mutex::new(Vec::new()));
    let (count, seen) = (requests.clone(), auth.clone());
    let handler: Arc<Handler> = Arc::from(handler);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let (count, seen, handler) = (count.clone(), seen.clone(), handler.clone());
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    let mut length = 0;
                    loop {
                        let mut h = String::new();
                        reader.read_line(&mut h).unwrap();
                        let h = h.trim_end();
                        if h.is_empty() {
                            break;
                        }
                        let lower = h.to_ascii_lowercase();
                        if let Some(v) = lower.strip_prefix("content-length:") {
                            length = v.trim().parse().unwrap();
                        }
                        if lower.starts_with("authorization:") {
                            seen.lock().unwrap().push(h["authorization:".len()..].trim().to_string());
                        }
                    }
                    let mut body = vec![0; length];
                    reader.read_exact(&mut body).unwrap();
                    let n = count.fetch_add(1, Ordering::SeqCst);
                    let (status, text) = handler(n, &serde_json::from_slice(&body).unwrap_or(Value::Null));
                    let resp = format!(
                        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{text}",
                        text.len()
                    );
                    if stream.write_all(resp.as_bytes()).is_err() {
                        return;
                    }
                }
            });
        }
    });
    Stub { url, requests, auth }
}

fn unit(dim: usize, hot: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[hot % dim] = 1.0;
    v
}

/// Echo stub: one unit vector per input, hot index = input length.
fn echo(_: usize, body: &Value) -> (u16, String) {
    let inputs = body["input"].as_array().unwrap();
    let data: Vec<Value> = inputs
        .iter()
        .enumerate()
        .rev()
        .map(|(i, s)| json!({"index": i, "embedding": unit(4, s.as_str().unwrap().len())}))
        .collect();
    (200, json!({"data": data}).to_string())
}

fn prompts(texts: &[&str]) -> Vec<Prompt> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Prompt {
            value: i.to_string(),
            text: t.to_string(),
        })
        .collect()
}

fn config(url: &str, token_env: &str) -> EndpointConfig {
    EndpointConfig {
        base_url: url.to_string(),
        model: "stub-model".into(),
        token_env: token_env.into(),
        batch_size: 2,
        max_retries: 3,
        backoff_ms: 1,
        max_in_flight: 2,
        timeout_secs: 10,
    }
}

const SECRET: &str = "sk-test-do-not-leak";

#[test]
fn three_prompts_round_trip() {
    std::env::set_var("GEODEX_STUB_TOKEN_A", SECRET);
    let s = stub(Box::new(echo));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("emb.csv");
    let ps = prompts(&["red", "green", "yellow"]);
    let summary = fetch_embeddings(&ps, &out, &config(&s.url, "GEODEX_STUB_TOKEN_A")).unwrap();
    assert_eq!((summary.fetched, summary.skipped), (3, 0));

    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["label", "value", "x0", "x1", "x2", "x3"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (rec, p) in rows.iter().zip(&ps) {
        assert_eq!(&rec[0], p.text);
        assert_eq!(&rec[1], p.value);
        let v: Vec<f64> = (2..6).map(|j| rec[j].parse().unwrap()).collect();
        assert_eq!(v, unit(4, p.text.len()));
    }
    assert!(s.auth.lock().unwrap().iter().all(|h| h == &format!("Bearer {SECRET}")));
    assert!(!std::fs::read_to_string(&out).unwrap().contains(SECRET));
}

#[test]
fn missing_token_fails_before_any_request() {
    std::env::remove_var("GEODEX_STUB_TOKEN_UNSET");
    let s = stub(Box::new(echo));
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_embeddings(&prompts(&["a"]), &dir.path().join("x.csv"), &config(&s.url, "GEODEX_STUB_TOKEN_UNSET"))
        .unwrap_err();
    assert!(matches!(err, GeodexError::Config(_)));
    assert_eq!(err.exit_code(), 1);
    assert_eq!(s.requests.load(Ordering::SeqCst), 0);
}

#[test]
fn count_mismatch_is_an_error() {
    std::env::set_var("GEODEX_STUB_TOKEN_B", SECRET);
    let s = stub(Box::new(|_, _| {
        let data = vec![json!({"index": 0, "embedding": unit(3, 0)}), json!({"index": 1, "embedding": unit(3, 1)})];
        (200, json!({"data": data}).to_string())
    }));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&s.url, "GEODEX_STUB_TOKEN_B");
    cfg.batch_size = 3;
    let err = fetch_embeddings(&prompts(&["a", "b", "c"]), &dir.path().join("x.csv"), &cfg).unwrap_err();
    assert!(err.to_string().contains("mismatch"), "{err}");
}

#[test]
fn resumes_where_it_stopped() {
    std::env::set_var("GEODEX_STUB_TOKEN_C", SECRET);
    let s = stub(Box::new(echo));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("emb.csv");
    let cfg = config(&s.url, "GEODEX_STUB_TOKEN_C");
    fetch_embeddings(&prompts(&["one", "two"]), &out, &cfg).unwrap();
    let before = s.requests.load(Ordering::SeqCst);
    let summary = fetch_embeddings(&prompts(&["one", "two", "three"]), &out, &cfg).unwrap();
    assert_eq!((summary.fetched, summary.skipped), (1, 2));
    assert_eq!(s.requests.load(Ordering::SeqCst), before + 1);
    let rows = csv::Reader::from_path(&out).unwrap().records().count();
    assert_eq!(rows, 3);
}

#[test]
fn transient_failures_are_retried() {
    std::env::set_var("GEODEX_STUB_TOKEN_D", SECRET);
    let s = stub(Box::new(|n, body| if n < 2 { (503, "busy".into()) } else { echo(n, body) }));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&s.url, "GEODEX_STUB_TOKEN_D");
    cfg.max_in_flight = 1;
    let summary = fetch_embeddings(&prompts(&["a", "b"]), &dir.path().join("x.csv"), &cfg).unwrap();
    assert_eq!(summary.fetched, 2);
    assert_eq!(s.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_failure_surfaces_as_network_error() {
    std::env::set_var("GEODEX_STUB_TOKEN_E", SECRET);
    let s = stub(Box::new(|_, _| (429, "slow down".into())));
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&s.url, "GEODEX_STUB_TOKEN_E");
    let err = fetch_embeddings(&prompts(&["a"]), &dir.path().join("x.csv"), &cfg).unwrap_err();
    assert!(matches!(err, GeodexError::Network(_)));
    assert_eq!(err.exit_code(), 3);
    assert_eq!(s.requests.load(Ordering::SeqCst), 4);
    assert!(!err.to_string().contains(SECRET));
}

#[test]
fn client_errors_are_not_retried() {
    std::env::set_var("GEODEX_STUB_TOKEN_F", SECRET);
    let s = stub(Box::new(|_, _| (401, r#"{"error":"bad key"}"#.into())));
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_embeddings(&prompts(&["a"]), &dir.path().join("x.csv"), &config(&s.url, "GEODEX_STUB_TOKEN_F"))
        .unwrap_err();
    assert!(err.to_string().contains("bad key"), "{err}");
    assert_eq!(s.requests.load(Ordering::SeqCst), 1);
}

#[test]
fn prompt_file_formats() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prompts.txt");
    std::fs::write(&path, "1900\tThe year is 1900\n\nplain prompt\n").unwrap();
    let ps = read_prompts(&path).unwrap();
    assert_eq!(ps[0], Prompt { value: "1900".into(), text: "The year is 1900".into() });
    assert_eq!(ps[1], Prompt { value: "1".into(), text: "plain prompt".into() });
}
