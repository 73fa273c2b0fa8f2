//! Message protocol between the session service and its clients.
//!
//! Messages are JSON objects with a `"type"` field. [`Connection`] holds the
//! per-connection state machine and is independent of the transport: feed it
//! one line at a time and send back whatever it returns.
//!
//! ```text
//! C: {"type":"hello"}
//! S: {"type":"hello","protocol":1,"catalog_version":"...","catalog":{...}}
//! C: {"type":"session_start","user":"alice","algorithm":"template"}
//! S: {"type":"frame_begin","nonce":"9f..","frame_index":1,"frame_duration":4000.0,"catalog_version":"..."}
//! C: {"type":"gaze_point","nonce":"9f..","t":0.0,"x":160.0,"y":120.0}
//! C: {"type":"frame_end","nonce":"9f.."}
//! S: {"type":"frame_ack","nonce":"9f..","frame_index":1}
//! S: {"type":"frame_begin","nonce":"9f..","frame_index":2,...}
//! ...
//! S: {"type":"auth_result","nonce":"9f..","granted":true}
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::auth::{Algorithm, AuthEngine, AuthSession, PasswordTriple};
use crate::geometry::TimedSample;

pub const PROTOCOL_VERSION: u32 = 1;
/// Points later than this past the frame duration are dropped.
pub const LATE_GRACE_MS: f64 = 250.0;
pub const MAX_POINTS_PER_FRAME: usize = 4096;
pub const MAX_LINE_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello,
    Enroll {
        user: String,
        /// Comma-separated shape ids, e.g. `"l,e,c"`.
        triple: String,
        #[serde(default)]
        algorithm: Option<Algorithm>,
    },
    SessionStart {
        user: String,
        #[serde(default)]
        algorithm: Option<Algorithm>,
    },
    GazePoint {
        nonce: String,
        t: f64,
        x: f64,
        y: f64,
    },
    FrameEnd {
        nonce: String,
    },
}

const CLIENT_TYPES: [&str; 5] = ["hello", "enroll", "session_start", "gaze_point", "frame_end"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol: u32,
        catalog_version: String,
        catalog: Value,
    },
    EnrollOk {
        user: String,
    },
    FrameBegin {
        nonce: String,
        frame_index: usize,
        frame_duration: f64,
        catalog_version: String,
    },
    FrameAck {
        nonce: String,
        frame_index: usize,
    },
    AuthResult {
        nonce: String,
        granted: bool,
    },
    Error {
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.to_owned(),
            message: message.into(),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("server messages serialize");
        s.push('\n');
        s
    }
}

struct Active {
    session: AuthSession,
    buffer: Vec<TimedSample>,
}

/// Protocol state for one client connection.
pub struct Connection {
    engine: Arc<AuthEngine>,
    active: Option<Active>,
}

impl Connection {
    pub fn new(engine: Arc<AuthEngine>) -> Self {
        Self { engine, active: None }
    }

    pub fn in_session(&self) -> bool {
        self.active.is_some()
    }

    /// Handles one raw line (without the newline).
    pub fn handle_line(&mut self, line: &[u8]) -> Vec<ServerMessage> {
        let text = match std::str::from_utf8(line) {
            Ok(t) => t.trim(),
            Err(_) => return self.violation("malformed", "message is not UTF-8"),
        };
        if text.is_empty() {
            return Vec::new();
        }
        let value: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return self.violation("malformed", format!("invalid JSON: {e}")),
        };
        let kind = match value.get("type").and_then(Value::as_str) {
            Some(k) => k.to_owned(),
            None => return self.violation("malformed", "missing string field \"type\""),
        };
        if !CLIENT_TYPES.contains(&kind.as_str()) {
            return self.violation("unknown_type", format!("unknown message type {kind:?}"));
        }
        match serde_json::from_value::<ClientMessage>(value) {
            Ok(msg) => self.handle(msg),
            Err(e) => self.violation("malformed", format!("bad {kind} message: {e}")),
        }
    }

    /// The line exceeded [`MAX_LINE_BYTES`] and was discarded.
    pub fn oversized_line(&mut self) -> Vec<ServerMessage> {
        self.violation("line_too_long", format!("messages are limited to {MAX_LINE_BYTES} bytes"))
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Hello => {
                let catalog = self.engine.catalog();
                vec![ServerMessage::Hello {
                    protocol: PROTOCOL_VERSION,
                    catalog_version: catalog.version().to_owned(),
                    catalog: catalog.to_value(),
                }]
            }
            ClientMessage::Enroll { user, triple, algorithm } => {
                if self.active.is_some() {
                    return self.violation("session_active", "enroll is not allowed during a session");
                }
                let triple: PasswordTriple = match triple.parse() {
                    Ok(t) => t,
                    Err(e) => return vec![ServerMessage::error("malformed", e.to_string())],
                };
                match self
                    .engine
                    .enroll(&user, &triple, algorithm.unwrap_or(Algorithm::Template))
                {
                    Ok(_) => vec![ServerMessage::EnrollOk { user }],
                    Err(e) => vec![ServerMessage::error(e.code(), e.to_string())],
                }
            }
            ClientMessage::SessionStart { user, algorithm } => {
                if self.active.is_some() {
                    return self.violation("session_active", "a session is already running");
                }
                match self.engine.begin_session(&user, algorithm) {
                    Ok((session, plan)) => {
                        let begin = ServerMessage::FrameBegin {
                            nonce: session.nonce().to_owned(),
                            frame_index: 1,
                            frame_duration: plan.frame_duration_ms,
                            catalog_version: self.engine.catalog().version().to_owned(),
                        };
                        self.active = Some(Active {
                            session,
                            buffer: Vec::new(),
                        });
                        vec![begin]
                    }
                    Err(e) => vec![ServerMessage::error(e.code(), e.to_string())],
                }
            }
            ClientMessage::GazePoint { nonce, t, x, y } => {
                if let Err(out) = self.check_nonce(&nonce) {
                    return out;
                }
                if !(t.is_finite() && x.is_finite() && y.is_finite()) {
                    return self.violation("malformed", "gaze_point needs finite t, x, y");
                }
                let limit = self.engine.catalog().plan().frame_duration_ms + LATE_GRACE_MS;
                let active = self.active.as_mut().expect("checked");
                if t > limit {
                    return Vec::new();
                }
                if active.buffer.len() >= MAX_POINTS_PER_FRAME {
                    return self.violation("too_many_points", format!("at most {MAX_POINTS_PER_FRAME} points per frame"));
                }
                active.buffer.push(TimedSample::new(t, x, y));
                Vec::new()
            }
            ClientMessage::FrameEnd { nonce } => {
                if let Err(out) = self.check_nonce(&nonce) {
                    return out;
                }
                let mut active = self.active.take().expect("checked");
                let samples = std::mem::take(&mut active.buffer);
                let outcome = match self.engine.submit_samples(&mut active.session, samples) {
                    Ok(o) => o,
                    Err(e) => return vec![ServerMessage::error(e.code(), e.to_string())],
                };
                let nonce = active.session.nonce().to_owned();
                let mut out = vec![ServerMessage::FrameAck {
                    nonce: nonce.clone(),
                    frame_index: outcome.frame_index,
                }];
                match outcome.decision {
                    Some(d) => out.push(ServerMessage::AuthResult {
                        nonce,
                        granted: d.is_granted(),
                    }),
                    None => {
                        out.push(ServerMessage::FrameBegin {
                            nonce,
                            frame_index: outcome.frame_index + 1,
                            frame_duration: self.engine.catalog().plan().frame_duration_ms,
                            catalog_version: self.engine.catalog().version().to_owned(),
                        });
                        self.active = Some(active);
                    }
                }
                out
            }
        }
    }

    fn check_nonce(&mut self, nonce: &str) -> Result<(), Vec<ServerMessage>> {
        match &self.active {
            None => Err(vec![ServerMessage::error("no_session", "no session is running")]),
            Some(a) if a.session.nonce() != nonce => {
                Err(self.violation("bad_nonce", "nonce does not match the running session"))
            }
            Some(_) => Ok(()),
        }
    }

    /// Reports an error; a running session is aborted as denied.
    fn violation(&mut self, code: &str, message: impl Into<String>) -> Vec<ServerMessage> {
        let mut out = vec![ServerMessage::error(code, message)];
        if let Some(mut active) = self.active.take() {
            self.engine.abort(&mut active.session);
            out.push(ServerMessage::AuthResult {
                nonce: active.session.nonce().to_owned(),
                granted: false,
            });
        }
        out
    }

    /// Called when the transport closes.
    pub fn disconnect(&mut self) {
        if let Some(mut active) = self.active.take() {
            self.engine.abort(&mut active.session);
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.disconnect();
    }
}
