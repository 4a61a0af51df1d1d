mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use common::designs::{record, HUT, TWO_LEGS};
use robomorph::compiler::is_corrupted;
use robomorph::components::{emit_design_text, parse_design_text};
use robomorph::generator::*;
use robomorph::prompts::{SYSTEM_PROMPT, USER_PROMPT};
use serde_json::Value;

fn bundle(texts: &[&str]) -> PromptBundle {
    PromptBundle {
        system: SYSTEM_PROMPT.to_string(),
        user: USER_PROMPT.to_string(),
        few_shots: texts
            .iter()
            .enumerate()
            .map(|(i, t)| format!("### EXAMPLE {} ###\n{}", i + 1, emit_design_text(&record(t))))
            .collect(),
    }
}

#[test]
fn offline_is_seeded() {
    let g = OfflineSampler::new();
    let b = bundle(&[HUT, TWO_LEGS]);
    let a = g.generate(&b, 5).unwrap().raw_text;
    assert_eq!(a, g.generate(&b, 5).unwrap().raw_text);
    let distinct: BTreeSet<String> = (0..20).map(|s| g.generate(&b, s).unwrap().raw_text).collect();
    assert!(distinct.len() > 10);
}

#[test]
fn offline_output_is_always_valid() {
    let g = OfflineSampler::new();
    for seed in 0..300 {
        let few: Vec<String> = (0..3).map(|i| emit_design_text(&common::random_record(seed * 3 + i))).collect();
        let b = PromptBundle {
            system: SYSTEM_PROMPT.into(),
            user: USER_PROMPT.into(),
            few_shots: few
                .iter()
                .enumerate()
                .map(|(i, t)| format!("### EXAMPLE {} ###\n{t}", i + 1))
                .collect(),
        };
        let r = g.generate(&b, seed).unwrap();
        assert_eq!(r.backend, "offline");
        assert!(!r.dead_end);
        let parsed = parse_design_text(&r.raw_text).unwrap();
        assert_eq!(is_corrupted(&parsed), None, "{}", r.raw_text);
        assert!(parsed.reasoning.starts_with("Started from example"));
        assert!(parsed.fitness.is_none());
    }
}

/// Starting from H-U-T, each call mutates a random member of the designs
/// found so far.
#[test]
fn offline_reaches_every_small_design() {
    let target = common::string_oracle(6);
    let g = OfflineSampler::with_max_steps(6);
    for base in 0..3u64 {
        let mut pool: BTreeMap<String, String> = BTreeMap::from([("H-U-T".to_string(), HUT.to_string())]);
        let mut calls = 0;
        while calls < 10_000 && !target.iter().all(|t| pool.contains_key(t)) {
            let b = PromptBundle {
                system: SYSTEM_PROMPT.into(),
                user: USER_PROMPT.into(),
                few_shots: pool
                    .values()
                    .enumerate()
                    .map(|(i, t)| format!("### EXAMPLE {} ###\n{t}", i + 1))
                    .collect(),
            };
            let r = g.generate(&b, base << 32 | calls).unwrap();
            let record = parse_design_text(&r.raw_text).unwrap();
            assert!(record.derivation.len() <= 6);
            pool.entry(record.validate().unwrap().canonical()).or_insert(r.raw_text);
            calls += 1;
        }
        let missing: Vec<&String> = target.iter().filter(|t| !pool.contains_key(*t)).collect();
        assert!(missing.is_empty(), "missing after {calls} calls: {missing:?}");
        assert_eq!(pool.len(), target.len());
        println!("base {base}: {} designs after {calls} calls", target.len());
    }
}

#[test]
fn offline_rejects_bad_bundles() {
    let g = OfflineSampler::new();
    assert!(matches!(g.generate(&bundle(&[]), 0), Err(GeneratorError::NoExamples)));
    let mut b = bundle(&[HUT]);
    b.few_shots[0] = "### EXAMPLE 1 ###\nnothing here".into();
    assert!(matches!(g.generate(&b, 0), Err(GeneratorError::BadExample { index: 1, .. })));
}

#[test]
fn mutation_kinds_stay_complete() {
    use rand::SeedableRng;
    let g = OfflineSampler::new();
    let elite = record(TWO_LEGS);
    for seed in 0..500 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (m, log) = g.mutate(&elite, &mut rng).unwrap();
        assert!(!log.is_empty());
        assert!(m.validate().unwrap().is_complete());
    }
}

struct Request {
    head: String,
    body: String,
}

/// Serves `replies` in order, one per connection, and records requests.
struct Mock {
    url: String,
    requests: Arc<Mutex<Vec<Request>>>,
    peak: Arc<AtomicUsize>,
}

fn mock(replies: Vec<(u16, String)>, delay: Duration) -> Mock {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let peak = Arc::new(AtomicUsize::new(0));
    let live = Arc::new(AtomicUsize::new(0));
    let (reqs, pk) = (requests.clone(), peak.clone());
    thread::spawn(move || {
        let replies = Arc::new(Mutex::new(replies.into_iter()));
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let (reqs, pk, live, replies) = (reqs.clone(), pk.clone(), live.clone(), replies.clone());
            thread::spawn(move || {
                let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                pk.fetch_max(now, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                reqs.lock().unwrap().push(Request {
                    head,
                    body: String::from_utf8(body).unwrap(),
                });
                let (status, text) = replies.lock().unwrap().next().unwrap_or((500, "exhausted".into()));
                thread::sleep(delay);
                live.fetch_sub(1, Ordering::SeqCst);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            });
        }
    });
    Mock { url, requests, peak }
}

fn completion(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 812, "completion_tokens": 97},
    })
    .to_string()
}

fn client(url: &str, retries: u32) -> RemoteGenerator {
    RemoteGenerator::with_key(
        RemoteConfig {
            endpoint: url.into(),
            model: "test-model".into(),
            max_retries: retries,
            backoff_base: 0.001,
            timeout: 10.0,
            ..RemoteConfig::default()
        },
        "sk-secret-123".into(),
    )
}

#[test]
fn remote_success_sends_one_plain_request() {
    let m = mock(vec![(200, completion(HUT))], Duration::ZERO);
    let b = bundle(&[TWO_LEGS]);
    let r = client(&m.url, 3).generate(&b, 0).unwrap();
    assert_eq!(r.raw_text, HUT);
    assert_eq!(r.backend, "remote:test-model");
    assert_eq!(
        r.usage,
        Some(TokenUsage {
            prompt_tokens: 812,
            completion_tokens: 97
        })
    );
    let reqs = m.requests.lock().unwrap();
    assert_eq!(reqs.len(), 1);
    assert!(reqs[0].head.contains("Bearer sk-secret-123"));
    let body: Value = serde_json::from_str(&reqs[0].body).unwrap();
    let keys: BTreeSet<&str> = body.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, BTreeSet::from(["messages", "model"]));
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], SYSTEM_PROMPT);
    assert_eq!(body["messages"][1]["content"], b.user_message());
    assert!(b.user_message().ends_with(USER_PROMPT));
}

#[test]
fn rate_limits_are_retried_then_reported() {
    let m = mock(vec![(429, "slow down".into()); 10], Duration::ZERO);
    let err = client(&m.url, 3).generate(&bundle(&[HUT]), 0).unwrap_err();
    assert!(matches!(err, GeneratorError::Remote { status: 429, .. }), "{err:?}");
    assert_eq!(m.requests.lock().unwrap().len(), 4);

    let m = mock(vec![(429, "x".into()), (503, "x".into()), (200, completion(HUT))], Duration::ZERO);
    assert_eq!(client(&m.url, 3).generate(&bundle(&[HUT]), 0).unwrap().raw_text, HUT);
    assert_eq!(m.requests.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let m = mock(vec![(400, "bad key sk-secret-123".into()); 3], Duration::ZERO);
    let err = client(&m.url, 3).generate(&bundle(&[HUT]), 0).unwrap_err();
    match err {
        GeneratorError::Remote { status: 400, body } => {
            assert!(!body.contains("sk-secret-123"));
            assert!(body.contains("<redacted>"));
        }
        e => panic!("{e:?}"),
    }
    assert_eq!(m.requests.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(&format!("http://127.0.0.1:{port}/x"), 1).generate(&bundle(&[HUT]), 0).unwrap_err();
    assert!(matches!(err, GeneratorError::Transport(_)), "{err:?}");
}

#[test]
fn in_flight_requests_are_capped() {
    let m = mock(vec![(200, completion(HUT)); 6], Duration::from_millis(150));
    let mut g = client(&m.url, 0);
    g = RemoteGenerator::with_key(
        RemoteConfig {
            max_in_flight: 2,
            ..g.config().clone()
        },
        "sk-secret-123".into(),
    );
    let b = bundle(&[HUT]);
    thread::scope(|s| {
        for i in 0..6 {
            let (g, b) = (&g, &b);
            s.spawn(move || g.generate(b, i).unwrap());
        }
    });
    assert_eq!(m.requests.lock().unwrap().len(), 6);
    assert_eq!(m.peak.load(Ordering::SeqCst), 2);
}

#[test]
fn key_comes_from_the_environment_and_stays_hidden() {
    let config = RemoteConfig {
        api_key_env: "ROBOMORPH_TEST_KEY_UNSET".into(),
        ..RemoteConfig::default()
    };
    assert!(matches!(
        RemoteGenerator::new(config),
        Err(GeneratorError::MissingApiKey(v)) if v == "ROBOMORPH_TEST_KEY_UNSET"
    ));
    let g = client("http://127.0.0.1:1/", 0);
    assert!(!format!("{g:?}").contains("sk-secret-123"));
}
