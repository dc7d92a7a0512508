//! Wire protocol for remote log-probability providers.
//!
//! Two transports carry the same JSON objects:
//!
//! - **HTTP**: `GET /v1/vocab` returns `{"eos_id": int, "tokens": [base64,
//!   ...]}`; `POST /v1/logprobs` with body `{"context": [int, ...]}` returns
//!   `{"logprobs": [float × |V|]}`.
//! - **Line stream**: one JSON object per line; each `{"context": [...]}`
//!   request line is answered with one `{"logprobs": [...]}` response line.
//!   The vocabulary is agreed out-of-band (the line transport has no vocab
//!   endpoint).
//!
//! JSON has no `-inf` literal, so non-finite log probabilities travel as
//! `null` in the `logprobs` array and are restored to `-inf` on receipt.
//! Timeouts and non-2xx statuses surface as
//! [`ModelError::ProviderUnavailable`]; a response of the wrong shape or an
//! unnormalized distribution surfaces as [`ModelError::BadDistribution`].

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::logprob::LogProbVector;
use crate::provider::{ModelError, TokenModel};
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VocabResponse {
    pub eos_id: u32,
    /// Token byte strings, base64-encoded.
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogprobsRequest {
    pub context: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogprobsResponse {
    /// `None` encodes a non-finite log probability (a masked token).
    #[serde(
        serialize_with = "serialize_logprobs",
        deserialize_with = "deserialize_logprobs"
    )]
    pub logprobs: Vec<f64>,
}

fn serialize_logprobs<S: serde::Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }))
}

fn deserialize_logprobs<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|x| x.unwrap_or(f64::NEG_INFINITY))
        .collect())
}

pub fn encode_vocab(vocab: &Vocabulary) -> VocabResponse {
    VocabResponse {
        eos_id: vocab.eos_id().raw(),
        tokens: (0..vocab.len())
            .map(|i| BASE64.encode(vocab.bytes(TokenId::new(i as u32)).expect("dense ids")))
            .collect(),
    }
}

pub fn decode_vocab(resp: &VocabResponse) -> Result<Vocabulary, ModelError> {
    let mut entries = Vec::with_capacity(resp.tokens.len());
    for (i, t) in resp.tokens.iter().enumerate() {
        let bytes = BASE64.decode(t).map_err(|e| {
            ModelError::ProviderUnavailable(format!("vocab token {i} is not valid base64: {e}"))
        })?;
        entries.push(bytes);
    }
    Ok(Vocabulary::new(entries, TokenId::new(resp.eos_id))?)
}

fn unavailable(context: &str, e: impl std::fmt::Display) -> ModelError {
    ModelError::ProviderUnavailable(format!("{context}: {e}"))
}

/// Minimal HTTP/1.1 exchange: one request, one response, connection closed.
fn http_roundtrip(
    host: &str,
    request: &[u8],
    timeout: Duration,
) -> Result<(u16, Vec<u8>), ModelError> {
    let addr = host
        .to_socket_addrs()
        .map_err(|e| unavailable("resolving endpoint", e))?
        .next()
        .ok_or_else(|| ModelError::ProviderUnavailable("endpoint resolves to nothing".into()))?;
    let stream = TcpStream::connect_timeout(&addr, timeout)
        .map_err(|e| unavailable("connecting", e))?;
    stream
        .set_read_timeout(Some(timeout))
        .and_then(|_| stream.set_write_timeout(Some(timeout)))
        .map_err(|e| unavailable("configuring socket", e))?;
    let mut stream = stream;
    stream
        .write_all(request)
        .map_err(|e| unavailable("sending request", e))?;

    let mut reader = BufReader::new(stream);
    let mut status_line = String::new();
    reader
        .read_line(&mut status_line)
        .map_err(|e| unavailable("reading status", e))?;
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            ModelError::ProviderUnavailable(format!("malformed status line {status_line:?}"))
        })?;

    let mut content_length: Option<usize> = None;
    loop {
        let mut line = String::new();
        reader
            .read_line(&mut line)
            .map_err(|e| unavailable("reading headers", e))?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().ok();
            }
        }
    }
    let body = match content_length {
        Some(n) => {
            let mut buf = vec![0u8; n];
            reader
                .read_exact(&mut buf)
                .map_err(|e| unavailable("reading body", e))?;
            buf
        }
        None => {
            let mut buf = Vec::new();
            reader
                .read_to_end(&mut buf)
                .map_err(|e| unavailable("reading body", e))?;
            buf
        }
    };
    Ok((status, body))
}

fn http_request_bytes(method: &str, host: &str, path: &str, body: Option<&[u8]>) -> Vec<u8> {
    let mut out = Vec::new();
    let body = body.unwrap_or(b"");
    out.extend_from_slice(
        format!(
            "{method} {path} HTTP/1.1\r\nHost: {host}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            body.len()
        )
        .as_bytes(),
    );
    out.extend_from_slice(body);
    out
}

/// A [`TokenModel`] backed by an HTTP endpoint.
///
/// The vocabulary is fetched once at connect time; every `next_logprobs`
/// call is one POST.
#[derive(Debug)]
pub struct RemoteModel {
    host: String,
    timeout: Duration,
    vocab: Vocabulary,
}

impl RemoteModel {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

    /// `endpoint_url` is `http://host:port` (https is out of scope).
    pub fn connect(endpoint_url: &str, timeout: Duration) -> Result<Self, ModelError> {
        let host = endpoint_url
            .strip_prefix("http://")
            .ok_or_else(|| {
                ModelError::ProviderUnavailable(format!(
                    "unsupported endpoint {endpoint_url:?}: only http:// is understood"
                ))
            })?
            .trim_end_matches('/')
            .to_string();
        let req = http_request_bytes("GET", &host, "/v1/vocab", None);
        let (status, body) = http_roundtrip(&host, &req, timeout)?;
        if !(200..300).contains(&status) {
            return Err(ModelError::ProviderUnavailable(format!(
                "GET /v1/vocab returned status {status}"
            )));
        }
        let resp: VocabResponse =
            serde_json::from_slice(&body).map_err(|e| unavailable("decoding vocab", e))?;
        let vocab = decode_vocab(&resp)?;
        Ok(Self {
            host,
            timeout,
            vocab,
        })
    }
}

impl TokenModel for RemoteModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVector, ModelError> {
        let req_body = serde_json::to_vec(&LogprobsRequest {
            context: context.iter().map(|t| t.raw()).collect(),
        })
        .expect("request serializes");
        let req = http_request_bytes("POST", &self.host, "/v1/logprobs", Some(&req_body));
        let (status, body) = http_roundtrip(&self.host, &req, self.timeout)?;
        if !(200..300).contains(&status) {
            return Err(ModelError::ProviderUnavailable(format!(
                "POST /v1/logprobs returned status {status}"
            )));
        }
        let resp: LogprobsResponse =
            serde_json::from_slice(&body).map_err(|e| unavailable("decoding logprobs", e))?;
        if resp.logprobs.len() != self.vocab.len() {
            return Err(ModelError::BadDistribution(
                crate::logprob::LogProbError::ShapeMismatch {
                    expected: self.vocab.len(),
                    actual: resp.logprobs.len(),
                },
            ));
        }
        Ok(LogProbVector::from_normalized(resp.logprobs)?)
    }
}

fn write_http_response(stream: &mut TcpStream, status: u16, reason: &str, body: &[u8]) {
    let head = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    // Client disconnects are the client's problem; the serve loop moves on.
    let _ = stream
        .write_all(head.as_bytes())
        .and_then(|_| stream.write_all(body));
}

fn handle_http_conn<M: TokenModel>(stream: &mut TcpStream, model: &M) {
    let mut reader = BufReader::new(match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    });
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let mut parts = request_line.split_whitespace();
    let (method, path) = match (parts.next(), parts.next()) {
        (Some(m), Some(p)) => (m.to_string(), p.to_string()),
        _ => return,
    };
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).is_err() {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    if content_length > 0 && reader.read_exact(&mut body).is_err() {
        return;
    }

    match (method.as_str(), path.as_str()) {
        ("GET", "/v1/vocab") => {
            let body = serde_json::to_vec(&encode_vocab(model.vocab())).expect("serializes");
            write_http_response(stream, 200, "OK", &body);
        }
        ("POST", "/v1/logprobs") => match serde_json::from_slice::<LogprobsRequest>(&body) {
            Ok(req) => {
                let context: Vec<TokenId> = req.context.iter().map(|i| TokenId::new(*i)).collect();
                match model.next_logprobs(&context) {
                    Ok(lp) => {
                        let body = serde_json::to_vec(&LogprobsResponse {
                            logprobs: lp.values().to_vec(),
                        })
                        .expect("serializes");
                        write_http_response(stream, 200, "OK", &body);
                    }
                    Err(e) => {
                        write_http_response(stream, 500, "Internal Server Error", e.to_string().as_bytes());
                    }
                }
            }
            Err(e) => write_http_response(stream, 400, "Bad Request", e.to_string().as_bytes()),
        },
        _ => write_http_response(stream, 404, "Not Found", b"{}"),
    }
}

/// Serve `model` over HTTP until the listener fails; the reference
/// implementation of the protocol and the peer the tests talk to.
pub fn serve_http<M: TokenModel>(listener: TcpListener, model: M) {
    for stream in listener.incoming() {
        match stream {
            Ok(mut s) => handle_http_conn(&mut s, &model),
            Err(_) => break,
        }
    }
}

/// Answer line-protocol requests from `reader` on `writer` until EOF.
///
/// Every input line must be a `{"context": [...]}` object; malformed lines
/// get an `{"error": "..."}` line and processing continues.
pub fn serve_lines<M: TokenModel>(
    model: &M,
    reader: impl BufRead,
    mut writer: impl Write,
) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<LogprobsRequest>(&line) {
            Ok(req) => {
                let context: Vec<TokenId> = req.context.iter().map(|i| TokenId::new(*i)).collect();
                match model.next_logprobs(&context) {
                    Ok(lp) => serde_json::to_string(&LogprobsResponse {
                        logprobs: lp.values().to_vec(),
                    })
                    .expect("serializes"),
                    Err(e) => format!("{{\"error\":{}}}", serde_json::json!(e.to_string())),
                }
            }
            Err(e) => format!("{{\"error\":{}}}", serde_json::json!(e.to_string())),
        };
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Line-protocol client over a TCP stream with an out-of-band vocabulary.
#[derive(Debug)]
pub struct LineModel {
    vocab: Vocabulary,
    stream: std::cell::RefCell<BufReader<TcpStream>>,
}

impl LineModel {
    pub fn new(stream: TcpStream, vocab: Vocabulary, timeout: Duration) -> Result<Self, ModelError> {
        stream
            .set_read_timeout(Some(timeout))
            .and_then(|_| stream.set_write_timeout(Some(timeout)))
            .map_err(|e| unavailable("configuring socket", e))?;
        Ok(Self {
            vocab,
            stream: std::cell::RefCell::new(BufReader::new(stream)),
        })
    }
}

impl TokenModel for LineModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVector, ModelError> {
        let mut guard = self.stream.borrow_mut();
        let request = serde_json::to_string(&LogprobsRequest {
            context: context.iter().map(|t| t.raw()).collect(),
        })
        .expect("request serializes");
        {
            let stream = guard.get_mut();
            stream
                .write_all(request.as_bytes())
                .and_then(|_| stream.write_all(b"\n"))
                .map_err(|e| unavailable("sending request line", e))?;
        }
        let mut line = String::new();
        guard
            .read_line(&mut line)
            .map_err(|e| unavailable("reading response line", e))?;
        if line.is_empty() {
            return Err(ModelError::ProviderUnavailable("peer closed the stream".into()));
        }
        if let Ok(err) = serde_json::from_str::<serde_json::Value>(&line) {
            if let Some(msg) = err.get("error").and_then(|v| v.as_str()) {
                return Err(ModelError::ProviderUnavailable(format!("peer error: {msg}")));
            }
        }
        let resp: LogprobsResponse =
            serde_json::from_str(&line).map_err(|e| unavailable("decoding response line", e))?;
        if resp.logprobs.len() != self.vocab.len() {
            return Err(ModelError::BadDistribution(
                crate::logprob::LogProbError::ShapeMismatch {
                    expected: self.vocab.len(),
                    actual: resp.logprobs.len(),
                },
            ));
        }
        Ok(LogProbVector::from_normalized(resp.logprobs)?)
    }
}
