//! Minimal HTTP/1.1 predict service over a loaded pipeline.
//!
//! Routes: `GET /v1/health` and `POST /v1/predict` with body
//! `{"text": "..."}`. Requests over 1 MiB are rejected with 413; malformed
//! or empty input gets 400 with a JSON error body. One thread per
//! connection over an immutable shared pipeline; responses close the
//! connection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;

use crate::error::Result;
use crate::model_file::Pipeline;

pub const MAX_BODY_BYTES: usize = 1024 * 1024;

/// A bound, running predict server.
pub struct Server {
    pub addr: SocketAddr,
    listener: TcpListener,
    pipeline: Arc<Pipeline>,
}

impl Server {
    /// Bind to `addr` (use port 0 to pick a free port).
    pub fn bind(pipeline: Pipeline, addr: &str) -> Result<Server> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        Ok(Server {
            addr,
            listener,
            pipeline: Arc::new(pipeline),
        })
    }

    /// Accept connections forever on the calling thread.
    pub fn run(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let Ok(stream) = stream else { continue };
            let pipeline = Arc::clone(&self.pipeline);
            std::thread::spawn(move || {
                let _ = handle_connection(stream, &pipeline);
            });
        }
        Ok(())
    }

    /// Accept connections on a background thread (used by tests).
    pub fn run_background(self) -> SocketAddr {
        let addr = self.addr;
        std::thread::spawn(move || {
            let _ = self.run();
        });
        addr
    }
}

struct Request {
    method: String,
    path: String,
    content_length: Option<usize>,
    body: Vec<u8>,
}

enum ParseOutcome {
    Ok(Request),
    TooLarge,
    Bad(&'static str),
}

fn parse_request(stream: &mut TcpStream) -> std::io::Result<ParseOutcome> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let (Some(method), Some(path)) = (parts.next(), parts.next()) else {
        return Ok(ParseOutcome::Bad("malformed request line"));
    };
    let method = method.to_string();
    let path = path.to_string();

    let mut content_length = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse::<usize>().ok();
            }
        }
    }

    let mut body = Vec::new();
    if let Some(len) = content_length {
        if len > MAX_BODY_BYTES {
            return Ok(ParseOutcome::TooLarge);
        }
        body.resize(len, 0);
        reader.read_exact(&mut body)?;
    }
    Ok(ParseOutcome::Ok(Request {
        method,
        path,
        content_length,
        body,
    }))
}

fn write_response(
    stream: &mut TcpStream,
    status: u16,
    reason: &str,
    content_type: &str,
    body: &str,
) {
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

fn json_error(stream: &mut TcpStream, status: u16, reason: &str, message: &str) {
    let body = serde_json::json!({ "error": message }).to_string();
    write_response(stream, status, reason, "application/json", &body);
}

fn handle_connection(mut stream: TcpStream, pipeline: &Pipeline) -> std::io::Result<()> {
    let request = match parse_request(&mut stream)? {
        ParseOutcome::Ok(r) => r,
        ParseOutcome::TooLarge => {
            json_error(
                &mut stream,
                413,
                "Payload Too Large",
                "request body exceeds 1 MiB",
            );
            return Ok(());
        }
        ParseOutcome::Bad(msg) => {
            json_error(&mut stream, 400, "Bad Request", msg);
            return Ok(());
        }
    };

    match (request.method.as_str(), request.path.as_str()) {
        ("GET", "/v1/health") => {
            write_response(&mut stream, 200, "OK", "text/plain", "ok");
        }
        ("POST", "/v1/predict") => {
            if request.content_length.is_none() {
                json_error(&mut stream, 400, "Bad Request", "missing request body");
                return Ok(());
            }
            let parsed: std::result::Result<serde_json::Value, _> =
                serde_json::from_slice(&request.body);
            let Ok(value) = parsed else {
                json_error(&mut stream, 400, "Bad Request", "malformed JSON body");
                return Ok(());
            };
            let Some(text) = value.get("text").and_then(|t| t.as_str()) else {
                json_error(&mut stream, 400, "Bad Request", "missing \"text\" field");
                return Ok(());
            };
            if text.trim().is_empty() {
                json_error(&mut stream, 400, "Bad Request", "empty document");
                return Ok(());
            }
            match pipeline.predict_text(text) {
                Ok((label, scores)) => {
                    let scores: std::collections::BTreeMap<String, f64> = scores
                        .into_iter()
                        .map(|(l, s)| (l.to_string(), s))
                        .collect();
                    let body = serde_json::json!({
                        "label": label,
                        "scheme": pipeline.scheme.to_string(),
                        "scores": scores,
                    })
                    .to_string();
                    write_response(&mut stream, 200, "OK", "application/json", &body);
                }
                Err(e) => {
                    json_error(&mut stream, 400, "Bad Request", &e.to_string());
                }
            }
        }
        _ => {
            json_error(&mut stream, 404, "Not Found", "no such route");
        }
    }
    Ok(())
}
