//! The completions client against an in-process HTTP stub.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use asmx::backends::{Backend, BackendError, RemoteBackend, RemoteConfig, TranspileRequest};
use asmx::config::Prompt;
use asmx::core::asmtext::NormalizationPolicy;
use asmx::core::tokenizer::{Fallback, TokenizerSpec};
use asmx::core::{GenerationParams, IsaName};
use asmx::dataset::load_eval_suite;
use asmx::functional::evaluate_suite;
use serde_json::{json, Value};

type Handler = dyn Fn(&Value) -> (u16, String) + Send + Sync;

struct Stub {
    url: String,
    requests: Arc<Mutex<Vec<Value>>>,
    peak: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<Value> {
    let mut reader = BufReader::new(stream);
    let mut len = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    serde_json::from_slice(&body).ok()
}

fn serve(handler: Arc<Handler>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let peak = Arc::new(AtomicUsize::new(0));
    let active = Arc::new(AtomicUsize::new(0));
    let (reqs, pk) = (requests.clone(), peak.clone());
    std::thread::spawn(move || {
        for conn in listener.incoming() {
            let Ok(mut stream) = conn else { continue };
            let (handler, reqs, pk, active) = (handler.clone(), reqs.clone(), pk.clone(), active.clone());
            std::thread::spawn(move || {
                let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                pk.fetch_max(now, Ordering::SeqCst);
                if let Some(body) = read_request(&mut stream) {
                    reqs.lock().unwrap().push(body.clone());
                    let (status, text) = handler(&body);
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                        text.len()
                    );
                }
                active.fetch_sub(1, Ordering::SeqCst);
            });
        }
    });
    Stub { url, requests, peak }
}

fn choices(texts: &[&str]) -> String {
    json!({"choices": texts.iter().map(|t| json!({"text": t})).collect::<Vec<_>>()}).to_string()
}

fn backend(url: &str, retries: u32) -> RemoteBackend {
    let mut cfg = RemoteConfig::new(url);
    cfg.max_retries = retries;
    cfg.backoff = Duration::from_millis(10);
    cfg.timeout = Duration::from_secs(5);
    cfg.model = Some("stub-model".into());
    RemoteBackend::new(cfg, Prompt::default(), TokenizerSpec::fallback_only(Fallback::ByteLevel))
}

fn request(beams: u32) -> TranspileRequest {
    TranspileRequest::new("movl $5, %eax\nret\n", IsaName::Riscv64, GenerationParams::default().with_beams(beams))
}

#[test]
fn beams_and_prompt_reach_the_server() {
    let stub = serve(Arc::new(|_: &Value| (200, choices(&["li a0, 5\nret\n", "addi a0, zero, 5\nret\n"]))));
    let resp = backend(&stub.url, 0).transpile(&request(2)).unwrap();
    assert_eq!(resp.candidates.len(), 2);
    assert_eq!(resp.candidates[1].text, "addi a0, zero, 5\nret\n");
    assert_eq!(resp.backend_id, "remote");
    let seen = stub.requests.lock().unwrap();
    let body = &seen[0];
    assert_eq!(body["n"], 2);
    assert_eq!(body["best_of"], 2);
    assert_eq!(body["use_beam_search"], true);
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["model"], "stub-model");
    let prompt = body["prompt"].as_str().unwrap();
    assert!(prompt.contains("RISCV64") && prompt.ends_with("movl $5, %eax\nret\n"), "{prompt}");
}

#[test]
fn server_errors_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let stub = serve(Arc::new(move |_: &Value| {
        if c.fetch_add(1, Ordering::SeqCst) < 2 {
            (503, "{\"error\":\"warming up\"}".into())
        } else {
            (200, choices(&["ret\n"]))
        }
    }));
    let resp = backend(&stub.url, 2).transpile(&request(1)).unwrap();
    assert_eq!(resp.candidates[0].text, "ret\n");
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_run_out() {
    let stub = serve(Arc::new(|_: &Value| (429, "slow down".into())));
    let err = backend(&stub.url, 1).transpile(&request(1)).unwrap_err();
    assert!(matches!(&err, BackendError::Unavailable(m) if m.contains("429")), "{err}");
    assert_eq!(stub.requests.lock().unwrap().len(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = serve(Arc::new(|_: &Value| (400, "bad prompt".into())));
    let err = backend(&stub.url, 3).transpile(&request(1)).unwrap_err();
    assert!(matches!(&err, BackendError::Refused(m) if m.contains("bad prompt")), "{err}");
    assert_eq!(stub.requests.lock().unwrap().len(), 1);
}

#[test]
fn malformed_body_is_refused() {
    let stub = serve(Arc::new(|_: &Value| (200, "{\"nope\":1}".into())));
    assert!(matches!(backend(&stub.url, 0).transpile(&request(1)), Err(BackendError::Refused(_))));
}

#[test]
fn unreachable_server_is_unavailable() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = backend(&format!("http://127.0.0.1:{port}"), 1).transpile(&request(1)).unwrap_err();
    assert!(matches!(err, BackendError::Unavailable(_)), "{err}");
}

#[test]
fn context_overflow_is_caught_before_sending() {
    let stub = serve(Arc::new(|_: &Value| (200, choices(&["ret\n"]))));
    let mut req = request(1);
    req.params.context_window = 4;
    let err = backend(&stub.url, 0).transpile(&req).unwrap_err();
    assert!(matches!(err, BackendError::ContextOverflow { window: 4, .. }), "{err}");
    assert!(stub.requests.lock().unwrap().is_empty());
}

#[test]
fn in_flight_requests_are_bounded() {
    let stub = serve(Arc::new(|_: &Value| {
        std::thread::sleep(Duration::from_millis(80));
        (200, choices(&["ret\n"]))
    }));
    let mut cfg = RemoteConfig::new(&stub.url);
    cfg.max_in_flight = 2;
    let b = RemoteBackend::new(cfg, Prompt::default(), TokenizerSpec::fallback_only(Fallback::ByteLevel));
    std::thread::scope(|s| {
        for _ in 0..6 {
            s.spawn(|| b.transpile(&request(1)).unwrap());
        }
    });
    assert_eq!(stub.requests.lock().unwrap().len(), 6);
    assert!(stub.peak.load(Ordering::SeqCst) <= 2);
}

#[test]
fn suite_through_a_stub_model() {
    let spec = TokenizerSpec::fallback_only(Fallback::ByteLevel);
    let cfg = common::config();
    let pairs = load_eval_suite(&common::fixtures().join("suite"), IsaName::Armv5, &cfg, &spec, 4).unwrap();
    // the "model" knows the ground truth for every prompt and gets one wrong
    let table: Vec<(String, String, String)> =
        pairs.iter().map(|p| (p.pair_id.clone(), p.x86.normalized.clone(), p.target.raw.clone())).collect();
    let stub = serve(Arc::new(move |body: &Value| {
        let prompt = body["prompt"].as_str().unwrap_or("");
        match table.iter().find(|(_, x86, _)| prompt.ends_with(x86.as_str())) {
            Some((id, _, _)) if id == "popcount" => (200, choices(&["\t.text\n\t.globl\tpopcount\npopcount:\n\tmov\tr0, #0\n\tbx\tlr\n"])),
            Some((_, _, truth)) => (200, choices(&[truth])),
            None => (404, "unknown prompt".into()),
        }
    }));
    let b = backend(&stub.url, 0);
    let (results, s) =
        evaluate_suite(&pairs, &b, &GenerationParams::default(), &cfg, NormalizationPolicy::Normalized, 4).unwrap();
    assert_eq!(s.n, pairs.len() as u64);
    assert_eq!(s.passes, s.n - 1);
    let miss: Vec<_> = results.iter().filter(|r| !r.outcome.is_pass()).map(|r| r.pair_id.as_str()).collect();
    assert_eq!(miss, ["popcount"]);
}
