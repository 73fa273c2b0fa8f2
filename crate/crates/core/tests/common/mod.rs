#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use gazepass::auth::{AuthConfig, AuthEngine, ManualClock, RateLimitPolicy};
use gazepass::catalog::{Catalog, ShapeId};
use gazepass::geometry::RawTrace;
use gazepass::sim::{simulate_pursuit, NoiseModel};
use serde_json::{json, Value};

pub fn catalog() -> Arc<Catalog> {
    Arc::new(Catalog::shipped())
}

pub fn engine_without_limits() -> AuthEngine {
    let config = AuthConfig {
        rate_limit: RateLimitPolicy::disabled(),
        ..AuthConfig::default()
    };
    AuthEngine::new(catalog(), config)
        .unwrap()
        .with_clock(Arc::new(ManualClock::new(0)))
}

pub fn follow(catalog: &Catalog, id: ShapeId, noise: &NoiseModel) -> RawTrace {
    simulate_pursuit(catalog.shape(id), catalog.plan(), noise).unwrap()
}

/// Line-oriented test client that records every message it receives.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    pub log: Vec<Value>,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Self {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        let writer = stream.try_clone().unwrap();
        Self {
            reader: BufReader::new(stream),
            writer,
            log: Vec::new(),
        }
    }

    pub fn send(&mut self, v: &Value) {
        self.send_raw(format!("{v}\n").as_bytes());
    }

    pub fn send_raw(&mut self, bytes: &[u8]) {
        self.writer.write_all(bytes).unwrap();
    }

    /// Writes `bytes` from another thread so replies can be read meanwhile.
    pub fn spawn_writer(&self, bytes: Vec<u8>) -> std::thread::JoinHandle<()> {
        let mut w = self.writer.try_clone().unwrap();
        std::thread::spawn(move || w.write_all(&bytes).unwrap())
    }

    pub fn recv(&mut self) -> Value {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).unwrap();
        assert!(n > 0, "connection closed");
        let v: Value = serde_json::from_str(&line).unwrap();
        self.log.push(v.clone());
        v
    }

    pub fn request(&mut self, v: &Value) -> Value {
        self.send(v);
        self.recv()
    }

    /// Runs a whole session and returns `Some(granted)`, or `None` if the
    /// server refused to start it (the error is in the log).
    pub fn authenticate(&mut self, user: &str, algorithm: &str, frames: &[RawTrace]) -> Option<bool> {
        let begin = self.request(&json!({"type": "session_start", "user": user, "algorithm": algorithm}));
        if begin["type"] != "frame_begin" {
            return None;
        }
        let nonce = begin["nonce"].as_str().unwrap().to_owned();
        for (i, trace) in frames.iter().enumerate() {
            let mut batch = String::new();
            for s in trace.samples() {
                batch.push_str(
                    &json!({"type": "gaze_point", "nonce": nonce, "t": s.t, "x": s.p.x, "y": s.p.y}).to_string(),
                );
                batch.push('\n');
            }
            batch.push_str(&json!({"type": "frame_end", "nonce": nonce}).to_string());
            batch.push('\n');
            self.send_raw(batch.as_bytes());
            let ack = self.recv();
            assert_eq!(ack["type"], "frame_ack", "{ack}");
            assert_eq!(ack["frame_index"], i + 1);
            let next = self.recv();
            if i + 1 < frames.len() {
                assert_eq!(next["type"], "frame_begin", "{next}");
                assert_eq!(next["frame_index"], i + 2);
            } else {
                assert_eq!(next["type"], "auth_result", "{next}");
                return next["granted"].as_bool();
            }
        }
        None
    }
}

/// Fields each server message may carry. Anything else could leak
/// per-frame results.
pub fn allowed_fields(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "hello" => &["type", "protocol", "catalog_version", "catalog"],
        "enroll_ok" => &["type", "user"],
        "frame_begin" => &["type", "nonce", "frame_index", "frame_duration", "catalog_version"],
        "frame_ack" => &["type", "nonce", "frame_index"],
        "auth_result" => &["type", "nonce", "granted"],
        "error" => &["type", "code", "message"],
        _ => return None,
    })
}

/// Checks a received message against [`allowed_fields`] and makes sure no
/// value outside the catalog document names a shape.
pub fn leak_free(msg: &Value) -> Result<(), String> {
    let obj = msg.as_object().ok_or("message is not an object")?;
    let kind = obj.get("type").and_then(Value::as_str).ok_or("no type")?;
    let allowed = allowed_fields(kind).ok_or_else(|| format!("unexpected type {kind}"))?;
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(format!("{kind} carries field {key}"));
        }
    }
    if kind == "error" {
        let text = obj["message"].as_str().unwrap_or_default();
        let words: Vec<&str> = text.split(|c: char| !c.is_ascii_alphanumeric()).collect();
        for id in ShapeId::ALL {
            let named = words.windows(2).any(|w| w[0] == "shape" && w[1] == id.as_str());
            if named || text.contains(id.display_name()) {
                return Err(format!("error message names a shape: {text}"));
            }
        }
    }
    Ok(())
}
