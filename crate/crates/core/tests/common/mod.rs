//! Shared helpers for integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

/// A request seen by [`StubServer`].
#[derive(Debug, Clone)]
pub struct SeenRequest {
    pub path: String,
    pub headers: Vec<(String, String)>,
}

impl SeenRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn query_name(&self) -> Option<String> {
        let url = url::Url::parse(&format!("http://stub{}", self.path)).ok()?;
        url.query_pairs().find(|(k, _)| k == "name").map(|(_, v)| v.into_owned())
    }
}

/// Minimal HTTP/1.1 server answering each request through `respond`.
pub struct StubServer {
    pub base_url: String,
    pub seen: Arc<Mutex<Vec<SeenRequest>>>,
}

impl StubServer {
    pub fn start<F>(respond: F) -> Self
    where
        F: Fn(&SeenRequest, usize) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() {
                    continue;
                }
                let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let mut headers = Vec::new();
                loop {
                    let mut h = String::new();
                    if reader.read_line(&mut h).unwrap_or(0) == 0 || h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        headers.push((k.trim().to_string(), v.trim().to_string()));
                    }
                }
                let req = SeenRequest { path, headers };
                let n = {
                    let mut log = log.lock().unwrap();
                    log.push(req.clone());
                    log.len()
                };
                let (status, body) = respond(&req, n);
                let reason = match status {
                    200 => "OK",
                    429 => "Too Many Requests",
                    _ => "Error",
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        Self { base_url, seen }
    }

    pub fn hits(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

/// Answers like a genderize service for a few known names.
pub fn genderize_stub() -> StubServer {
    StubServer::start(|req, _| {
        let name = req.query_name().unwrap_or_default();
        let body = match name.as_str() {
            "mary" => r#"{"name":"mary","gender":"female","probability":0.99,"count":120000}"#.to_string(),
            "james" => r#"{"name":"james","gender":"male","probability":0.98,"count":90000}"#.to_string(),
            other => format!(r#"{{"name":"{other}","gender":null,"probability":0.0,"count":0}}"#),
        };
        (200, body)
    })
}
