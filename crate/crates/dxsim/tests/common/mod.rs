#![allow(dead_code)]

use std::net::{SocketAddr, TcpListener as StdListener};
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use dxsim::service::{router, ServiceOptions};
use dxsim_core::{
    ingest_corpus, CorpusFormat, Engine, EngineOptions, HashedEmbedder, Preprocessor,
};
use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn five_cases() -> PathBuf {
    fixture("five_cases.jsonl")
}

pub fn dxsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dxsim"))
        .args(args)
        .env_remove("DXSIM_ENDPOINT")
        .output()
        .expect("dxsim runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Engine over the five-case fixture with the default hashed backend.
pub fn fixture_engine() -> Engine {
    let text = std::fs::read_to_string(five_cases()).unwrap();
    let corpus = ingest_corpus(text.as_bytes(), CorpusFormat::JsonLines).unwrap();
    Engine::build(
        corpus,
        Preprocessor::default(),
        Arc::new(HashedEmbedder::new(256, 42).unwrap()),
        None,
        EngineOptions::default(),
    )
    .unwrap()
}

pub fn spawn_router(app: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// Serves `engine` on an ephemeral port; returns the base URL.
pub fn spawn_service(engine: Engine) -> String {
    spawn_router(router(Arc::new(engine), &ServiceOptions::default()))
}

/// A base URL on which nothing is listening.
pub fn dead_endpoint() -> String {
    let l = StdListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}")
}

/// Embedding stub returning a 4-dim vector derived from each text's bytes.
pub fn spawn_embed_stub() -> (String, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    let app = Router::new().route(
        "/embed",
        post(move |Json(body): Json<Value>| {
            let counter = counter.clone();
            async move {
                counter.fetch_add(1, Ordering::SeqCst);
                let vectors: Vec<Vec<f64>> = body["texts"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|t| {
                        let b = t.as_str().unwrap().as_bytes();
                        let sum: u64 = b.iter().map(|&x| x as u64).sum();
                        vec![
                            1.0 + b.len() as f64,
                            (sum % 97) as f64,
                            (sum % 13) as f64,
                            1.0,
                        ]
                    })
                    .collect();
                Json(json!({"dim": 4, "vectors": vectors}))
            }
        }),
    );
    (spawn_router(app), calls)
}

/// Parses a report body and drops its timestamp.
pub fn without_timestamp(body: &[u8]) -> Value {
    let mut v: Value = serde_json::from_slice(body).unwrap();
    v.as_object_mut()
        .unwrap()
        .remove("generated_at")
        .expect("report has generated_at");
    v
}

/// Removes the `generated_at` line from a pretty-printed report.
pub fn strip_timestamp_line(body: &[u8]) -> String {
    String::from_utf8(body.to_vec())
        .unwrap()
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn get(url: &str) -> (u16, Vec<u8>) {
    respond(ureq::get(url).call())
}

pub fn post_json(url: &str, body: Value) -> (u16, Vec<u8>) {
    respond(ureq::post(url).send_json(body))
}

fn respond(r: Result<ureq::Response, ureq::Error>) -> (u16, Vec<u8>) {
    let resp = match r {
        Ok(resp) => resp,
        Err(ureq::Error::Status(_, resp)) => resp,
        Err(e) => panic!("transport error: {e}"),
    };
    let status = resp.status();
    let mut buf = Vec::new();
    std::io::Read::read_to_end(&mut resp.into_reader(), &mut buf).unwrap();
    (status, buf)
}

pub fn json_of(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap()
}
