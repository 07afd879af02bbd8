// Minimal HTTP/1.1 server for exercising HTTP clients against canned routes.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn ok(content_type: &str, body: impl Into<Vec<u8>>) -> Reply {
        Reply {
            status: 200,
            headers: vec![("Content-Type".into(), content_type.into())],
            body: body.into(),
        }
    }

    pub fn status(status: u16) -> Reply {
        Reply {
            status,
            headers: Vec::new(),
            body: Vec::new(),
        }
    }

    pub fn header(mut self, k: &str, v: &str) -> Reply {
        self.headers.push((k.into(), v.into()));
        self
    }
}

type Handler = dyn Fn(&str) -> Reply + Send + Sync;

pub struct FixtureServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<String>>>,
    stop: Arc<AtomicBool>,
}

impl FixtureServer {
    /// `handler` receives the request target (path and query).
    pub fn start(handler: impl Fn(&str) -> Reply + Send + Sync + 'static) -> FixtureServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let (log, stopped) = (requests.clone(), stop.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                if stopped.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                }
                let target = request_line
                    .split_whitespace()
                    .nth(1)
                    .unwrap_or("/")
                    .to_string();
                log.lock().unwrap().push(target.clone());
                let reply = handler(&target);
                let mut head = format!(
                    "HTTP/1.1 {} X\r\nContent-Length: {}\r\nConnection: close\r\n",
                    reply.status,
                    reply.body.len()
                );
                for (k, v) in &reply.headers {
                    head.push_str(&format!("{k}: {v}\r\n"));
                }
                head.push_str("\r\n");
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(&reply.body);
            }
        });
        FixtureServer {
            base_url,
            requests,
            stop,
        }
    }

    pub fn hits(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = std::net::TcpStream::connect(self.base_url.trim_start_matches("http://"));
    }
}

/// Socrata-style catalog: `/api/catalog/v1?limit&offset` pages over
/// `resources` and `/api/views/{id}/rows.csv` serves their CSV bodies.
pub fn socrata_routes(
    resources: Arc<Mutex<Vec<(String, String, String)>>>,
) -> impl Fn(&str) -> Reply + Send + Sync {
    move |target: &str| {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        let param = |k: &str| -> Option<usize> {
            query.split('&').find_map(|kv| {
                kv.strip_prefix(&format!("{k}="))
                    .and_then(|v| v.parse().ok())
            })
        };
        let res = resources.lock().unwrap();
        if path == "/api/catalog/v1" {
            let (limit, offset) = (param("limit").unwrap_or(100), param("offset").unwrap_or(0));
            let results: Vec<serde_json::Value> = res
                .iter()
                .skip(offset)
                .take(limit)
                .map(|(id, name, _)| serde_json::json!({"resource": {"id": id, "name": name, "description": format!("{name} records")}}))
                .collect();
            let body = serde_json::json!({"results": results, "resultSetSize": res.len()});
            return Reply::ok("application/json", body.to_string());
        }
        if let Some(id) = path
            .strip_prefix("/api/views/")
            .and_then(|p| p.strip_suffix("/rows.csv"))
        {
            if let Some((_, _, csv)) = res.iter().find(|r| r.0 == id) {
                return Reply::ok("text/csv; charset=utf-8", csv.clone());
            }
        }
        Reply::status(404)
    }
}
