//! Shared fixtures for the integration tests: a scripted chat-completion
//! stub server and small helpers.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use ludobench::agents::LlmClientConfig;

pub const STUB_KEY_ENV: &str = "LUDOBENCH_STUB_API_KEY";

/// Reply the stub sends for one request.
pub struct Reply {
    pub status: u16,
    pub content: String,
}

impl Reply {
    pub fn ok(content: impl Into<String>) -> Self {
        Self {
            status: 200,
            content: content.into(),
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            content: String::new(),
        }
    }
}

type Behaviour = dyn Fn(usize, &str) -> Reply + Send + Sync;

#[derive(Default)]
pub struct StubStats {
    pub requests: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub peak: AtomicUsize,
}

pub struct StubServer {
    pub url: String,
    pub stats: Arc<StubStats>,
}

/// A well-behaved answer for whatever the prompt asks.
pub fn sensible_answer(prompt: &str) -> String {
    if prompt.contains("CONFIDENCE") {
        "Reasoning first.\nANSWER: A CONFIDENCE: 80".into()
    } else if prompt.contains("<lower> TO <upper>") {
        "ANSWER: -1e300 TO 1e300".into()
    } else if prompt.contains("<deck letter>") {
        "ANSWER: C".into()
    } else if prompt.contains("<A or B>") {
        "ANSWER: B".into()
    } else {
        "ANSWER: 50".into()
    }
}

fn read_request(stream: &mut TcpStream) -> Option<String> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((k, v)) = trimmed.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).ok()?;
    String::from_utf8(body).ok()
}

fn prompt_of(body: &str) -> String {
    serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| v.pointer("/messages/0/content").and_then(|c| c.as_str()).map(str::to_string))
        .unwrap_or_default()
}

impl StubServer {
    /// Serves each connection on its own thread after `delay`.
    pub fn start(delay: Duration, behaviour: impl Fn(usize, &str) -> Reply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let stats = Arc::new(StubStats::default());
        let behaviour: Arc<Behaviour> = Arc::new(behaviour);
        let shared = Arc::clone(&stats);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let stats = Arc::clone(&shared);
                let behaviour = Arc::clone(&behaviour);
                thread::spawn(move || {
                    let Some(body) = read_request(&mut stream) else { return };
                    let index = stats.requests.fetch_add(1, Ordering::SeqCst);
                    let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    stats.peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(delay);
                    let reply = behaviour(index, &prompt_of(&body));
                    stats.in_flight.fetch_sub(1, Ordering::SeqCst);
                    let payload = serde_json::json!({
                        "choices": [{"message": {"role": "assistant", "content": reply.content}}]
                    })
                    .to_string();
                    let response = format!(
                        "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                        reply.status,
                        payload.len(),
                        payload
                    );
                    let _ = stream.write_all(response.as_bytes());
                    let _ = stream.flush();
                });
            }
        });
        Self { url, stats }
    }

    pub fn sensible(delay: Duration) -> Self {
        Self::start(delay, |_, prompt| Reply::ok(sensible_answer(prompt)))
    }

    pub fn requests(&self) -> usize {
        self.stats.requests.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.stats.peak.load(Ordering::SeqCst)
    }

    pub fn client_config(&self) -> LlmClientConfig {
        std::env::set_var(STUB_KEY_ENV, "stub-key");
        LlmClientConfig {
            timeout_secs: 5.0,
            max_retries: 3,
            max_concurrent: 2,
            backoff_base_secs: 0.01,
            ..LlmClientConfig::new(self.url.clone(), "stub-model", STUB_KEY_ENV)
        }
    }
}
