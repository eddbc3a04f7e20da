mod common;

use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::sync::atomic::Ordering;

use common::*;
use serde_json::Value;

fn corpus_arg() -> String {
    five_cases().display().to_string()
}

#[test]
fn validate_exit_codes() {
    let ok = dxsim(&["validate", "--corpus", &corpus_arg()]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout(&ok), "5 documents OK\n");

    let dup = dxsim(&[
        "validate",
        "--corpus",
        fixture("duplicate_id.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(dup.status.code(), Some(1));
    let diag = stderr(&dup);
    assert!(
        diag.contains("line 3: duplicate id 'a1' (first seen on line 1)"),
        "{diag}"
    );
    assert!(
        diag.contains("line 4:"),
        "every bad line is reported: {diag}"
    );

    let missing = dxsim(&["validate", "--corpus", "/definitely/not/here.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));

    assert_eq!(dxsim(&["validate"]).status.code(), Some(2));
    assert_eq!(dxsim(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn embed_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let args = [
        "embed",
        "--corpus",
        &corpus_arg(),
        "--cache",
        cache.to_str().unwrap(),
    ];
    assert_eq!(dxsim(&args).status.code(), Some(0));
    let first = std::fs::read(&cache).unwrap();
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 5);
    assert_eq!(dxsim(&args).status.code(), Some(0));
    assert_eq!(std::fs::read(&cache).unwrap(), first);

    let no_cache = dxsim(&["embed", "--corpus", &corpus_arg()]);
    assert_eq!(no_cache.status.code(), Some(2));
}

#[test]
fn remote_embed_reuses_cache() {
    let (stub, calls) = spawn_embed_stub();
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let args = [
        "embed",
        "--corpus",
        &corpus_arg(),
        "--cache",
        cache.to_str().unwrap(),
        "--backend",
        "remote",
        "--endpoint",
        &stub,
        "--model",
        "stub",
        "--dim",
        "4",
    ];
    let out = dxsim(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let after_first = calls.load(Ordering::SeqCst);
    assert!(after_first >= 1);
    assert_eq!(dxsim(&args).status.code(), Some(0));
    assert_eq!(
        calls.load(Ordering::SeqCst),
        after_first,
        "warm cache makes no backend calls"
    );
}

#[test]
fn remote_backend_down() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let dead = dead_endpoint();
    let out = dxsim(&[
        "embed",
        "--corpus",
        &corpus_arg(),
        "--cache",
        cache.to_str().unwrap(),
        "--backend",
        "remote",
        "--endpoint",
        &dead,
        "--model",
        "stub",
        "--timeout-ms",
        "2000",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("backend_unavailable"),
        "{}",
        stderr(&out)
    );
    assert!(!cache.exists() || std::fs::read(&cache).unwrap().is_empty());
}

#[test]
fn endpoint_env_fallback() {
    let (stub, calls) = spawn_embed_stub();
    let out = Command::new(env!("CARGO_BIN_EXE_dxsim"))
        .args([
            "similar",
            "--corpus",
            &corpus_arg(),
            "--target",
            "a1",
            "--backend",
            "remote",
            "--model",
            "m",
            "--dim",
            "4",
        ])
        .env("DXSIM_ENDPOINT", &stub)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(calls.load(Ordering::SeqCst) > 0);
    assert!(stdout(&out).contains("remote:model=m:dim=4"));
}

#[test]
fn similar_outputs() {
    let engine = fixture_engine();
    let oracle: Vec<String> = engine
        .top_k("a1", 2, &Default::default())
        .unwrap()
        .into_iter()
        .map(|m| m.doc_id)
        .collect();
    let out = dxsim(&[
        "similar",
        "--corpus",
        &corpus_arg(),
        "--target",
        "a1",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<String> = report["matches"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, oracle);

    let text = dxsim(&["similar", "--corpus", &corpus_arg(), "--target", "a1"]);
    let body = stdout(&text);
    assert!(body.starts_with("Similarity of cases to Company A (pharmaceutical)\n"));
    let rows = body
        .lines()
        .filter(|l| l.starts_with("1 ") || l.starts_with("2 ") || l.starts_with("3 "))
        .count();
    assert_eq!(rows, 2);

    let md = dxsim(&[
        "similar",
        "--corpus",
        &corpus_arg(),
        "--target",
        "a1",
        "--format",
        "markdown",
        "--k",
        "3",
    ]);
    assert_eq!(
        stdout(&md)
            .lines()
            .filter(|l| l.starts_with("| ") && !l.contains("Rank") && !l.contains("---"))
            .count(),
        3
    );

    let unknown = dxsim(&["similar", "--corpus", &corpus_arg(), "--target", "zz"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr(&unknown).contains("unknown_id"));
    assert!(unknown.stdout.is_empty());

    let strict = dxsim(&[
        "similar",
        "--corpus",
        &corpus_arg(),
        "--target",
        "a1",
        "--min-score",
        "0.999",
    ]);
    assert_eq!(strict.status.code(), Some(3));

    let conflict = dxsim(&[
        "similar",
        "--corpus",
        &corpus_arg(),
        "--target",
        "a1",
        "--include-same-sub-industry",
        "--exclude-same-industry",
    ]);
    assert_eq!(conflict.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(five_cases(), dir.path().join("cases.jsonl")).unwrap();
    let cfg = dir.path().join("dxsim.toml");
    std::fs::write(&cfg, "corpus = \"cases.jsonl\"\nseed = 7\nk = 3\n").unwrap();
    let out = dxsim(&[
        "similar",
        "--config",
        cfg.to_str().unwrap(),
        "--target",
        "a1",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["backend_fingerprint"], "hashed:seed=7:dim=256");
    assert_eq!(r["matches"].as_array().unwrap().len(), 3);

    let out = dxsim(&[
        "similar",
        "--config",
        cfg.to_str().unwrap(),
        "--target",
        "a1",
        "--format",
        "json",
        "--seed",
        "42",
        "--k",
        "1",
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["backend_fingerprint"], "hashed:seed=42:dim=256");
    assert_eq!(r["matches"].as_array().unwrap().len(), 1);

    std::fs::write(&cfg, "corpus = \"cases.jsonl\"\nbogus = 1\n").unwrap();
    let out = dxsim(&[
        "similar",
        "--config",
        cfg.to_str().unwrap(),
        "--target",
        "a1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .unwrap()
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows.push(rec.iter().skip(1).map(|c| c.parse().unwrap()).collect());
    }
    (header, rows)
}

#[test]
fn matrix_outputs() {
    let one = dxsim(&[
        "matrix",
        "--corpus",
        fixture("one_case.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(stdout(&one), "id,solo\nsolo,1.000000\n");

    let out = dxsim(&["matrix", "--corpus", &corpus_arg()]);
    assert_eq!(out.status.code(), Some(0));
    let (ids, m) = parse_csv(&stdout(&out));
    assert_eq!(ids, ["a1", "a2", "b1", "c1", "w1"]);
    for (i, row) in m.iter().enumerate() {
        assert!(row[i] >= 0.999999);
        for (j, v) in row.iter().enumerate() {
            assert!((v - m[j][i]).abs() < 1e-9);
        }
    }

    let json = dxsim(&["matrix", "--corpus", &corpus_arg(), "--format", "json"]);
    let v: Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v["ids"].as_array().unwrap().len(), 5);
    let m01 = v["scores"][0][1].as_f64().unwrap();
    assert!((m01 - m[0][1]).abs() <= 5e-7);
}

#[test]
fn common_features_outputs() {
    let out = dxsim(&[
        "common-features",
        "--corpus",
        &corpus_arg(),
        "--a",
        "a1",
        "--b",
        "a1",
        "--format",
        "json",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["jaccard"], 1.0);
    let out = dxsim(&[
        "common-features",
        "--corpus",
        &corpus_arg(),
        "--a",
        "a1",
        "--b",
        "b1",
        "--n",
        "2",
    ]);
    let text = stdout(&out);
    assert!(text.starts_with("a1 ~ b1  jaccard "));
    assert_eq!(text.lines().count(), 3);
    let out = dxsim(&[
        "common-features",
        "--corpus",
        &corpus_arg(),
        "--a",
        "a1",
        "--b",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn common_features_cli_matches_service_bytes() {
    let out = dxsim(&[
        "common-features",
        "--corpus",
        &corpus_arg(),
        "--a",
        "a1",
        "--b",
        "c1",
        "--format",
        "json",
    ]);
    let base = spawn_service(fixture_engine());
    let (status, body) = get(&format!("{base}/api/common-features?a=a1&b=c1"));
    assert_eq!(status, 200);
    assert_eq!(out.stdout, body);
}

fn spawn_serve(extra: &[&str]) -> (std::process::Child, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dxsim"))
        .args(["serve", "--corpus", &corpus_arg(), "--port", "0"])
        .args(extra)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let line = lines.next().unwrap().unwrap();
    let url = line.rsplit(' ').next().unwrap().to_string();
    assert!(url.starts_with("http://"), "{line}");
    // keep draining stderr so the child never blocks on a full pipe
    std::thread::spawn(move || for _ in lines {});
    (child, url)
}

#[cfg(unix)]
#[test]
fn serve_health_and_interrupt() {
    let (mut child, url) = spawn_serve(&[]);
    let (status, body) = get(&format!("{url}/api/health"));
    assert_eq!(status, 200);
    assert_eq!(json_of(&body)["corpus_size"], 5);
    let port = url.rsplit(':').next().unwrap().to_string();

    // second server on the same port fails to bind
    let busy = dxsim(&["serve", "--corpus", &corpus_arg(), "--port", &port]);
    assert_eq!(busy.status.code(), Some(1));
    assert!(stderr(&busy).contains("cannot bind"));

    Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
}
