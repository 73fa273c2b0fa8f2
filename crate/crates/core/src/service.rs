//! TCP front end for [`protocol::Connection`](crate::protocol::Connection),
//! one thread per connection.
//!
//! A connection whose first line starts with `GET ` is treated as HTTP:
//! `GET /catalog` returns the catalog document, and a WebSocket upgrade
//! carries the same JSON messages as text frames, one message per frame.
//! Anything else is newline-delimited JSON.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::auth::AuthEngine;
use crate::error::{Error, Result};
use tungstenite::handshake::derive_accept_key;
use tungstenite::protocol::{Role, WebSocket, WebSocketConfig};
use tungstenite::Message;

use crate::protocol::{Connection, ServerMessage, MAX_LINE_BYTES};

pub const DEFAULT_PORT: u16 = 7411;

/// A running service. Dropping the handle stops accepting new connections.
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn is_running(&self) -> bool {
        self.accept.as_ref().is_some_and(|h| !h.is_finished())
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_accepting();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub fn spawn(addr: &str, engine: Arc<AuthEngine>) -> Result<ServiceHandle> {
    let listener = TcpListener::bind(addr).map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    let local = listener
        .local_addr()
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let accept = std::thread::spawn(move || {
        for stream in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let engine = engine.clone();
            std::thread::spawn(move || {
                let _ = serve_connection(stream, engine);
            });
        }
    });
    Ok(ServiceHandle {
        addr: local,
        stop,
        accept: Some(accept),
    })
}

/// Runs the service on the current thread until the process exits.
pub fn serve(addr: &str, engine: Arc<AuthEngine>) -> Result<()> {
    spawn(addr, engine)?.wait();
    Ok(())
}

enum Line {
    Complete(Vec<u8>),
    Oversized,
    Eof,
}

/// Reads one line, discarding the rest of any line longer than `limit`.
fn read_line(reader: &mut impl BufRead, limit: usize) -> std::io::Result<Line> {
    let mut buf = Vec::new();
    let mut oversized = false;
    loop {
        let chunk = reader.fill_buf()?;
        if chunk.is_empty() {
            return Ok(match (oversized, buf.is_empty()) {
                (true, _) => Line::Oversized,
                (false, true) => Line::Eof,
                (false, false) => Line::Complete(buf),
            });
        }
        let (used, done) = match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => (i + 1, true),
            None => (chunk.len(), false),
        };
        if !oversized {
            let body = if done { &chunk[..used - 1] } else { chunk };
            if buf.len() + body.len() > limit {
                oversized = true;
                buf = Vec::new();
            } else {
                buf.extend_from_slice(body);
            }
        }
        reader.consume(used);
        if done {
            return Ok(if oversized { Line::Oversized } else { Line::Complete(buf) });
        }
    }
}

const MAX_HEADER_LINES: usize = 64;

fn serve_connection(stream: TcpStream, engine: Arc<AuthEngine>) -> std::io::Result<()> {
    let _ = stream.set_nodelay(true);
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut conn = Connection::new(engine.clone());
    let mut first = true;
    loop {
        let replies = match read_line(&mut reader, MAX_LINE_BYTES)? {
            Line::Eof => break,
            Line::Oversized => conn.oversized_line(),
            Line::Complete(line) if first && line.starts_with(b"GET ") => {
                return serve_http(&line, reader, writer, engine);
            }
            Line::Complete(line) => conn.handle_line(&line),
        };
        first = false;
        if !replies.is_empty() {
            let text: String = replies.iter().map(|m| m.to_line()).collect();
            writer.write_all(text.as_bytes())?;
        }
    }
    conn.disconnect();
    Ok(())
}

struct Request {
    path: String,
    headers: Vec<(String, String)>,
}

impl Request {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    fn wants_websocket(&self) -> bool {
        self.header("upgrade").is_some_and(|v| v.eq_ignore_ascii_case("websocket"))
    }
}

fn read_request(request_line: &[u8], reader: &mut impl BufRead) -> std::io::Result<Option<Request>> {
    let line = String::from_utf8_lossy(request_line);
    let Some(path) = line.split_whitespace().nth(1) else {
        return Ok(None);
    };
    let mut headers = Vec::new();
    for _ in 0..MAX_HEADER_LINES {
        match read_line(reader, MAX_LINE_BYTES)? {
            Line::Complete(h) => {
                let h = String::from_utf8_lossy(&h);
                let h = h.trim_end_matches('\r');
                if h.is_empty() {
                    return Ok(Some(Request {
                        path: path.to_owned(),
                        headers,
                    }));
                }
                if let Some((k, v)) = h.split_once(':') {
                    headers.push((k.trim().to_owned(), v.trim().to_owned()));
                }
            }
            Line::Oversized | Line::Eof => return Ok(None),
        }
    }
    Ok(None)
}

fn http_response(status: &str, content_type: &str, body: &str) -> String {
    format!(
        "HTTP/1.1 {status}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\n\
         Access-Control-Allow-Origin: *\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
}

fn serve_http(
    request_line: &[u8],
    mut reader: BufReader<TcpStream>,
    mut writer: TcpStream,
    engine: Arc<AuthEngine>,
) -> std::io::Result<()> {
    let Some(req) = read_request(request_line, &mut reader)? else {
        return writer.write_all(http_response("400 Bad Request", "text/plain", "bad request\n").as_bytes());
    };
    if req.wants_websocket() {
        let Some(key) = req.header("sec-websocket-key") else {
            return writer.write_all(http_response("400 Bad Request", "text/plain", "missing key\n").as_bytes());
        };
        writer.write_all(
            format!(
                "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n\
                 Sec-WebSocket-Accept: {}\r\n\r\n",
                derive_accept_key(key.as_bytes())
            )
            .as_bytes(),
        )?;
        let buffered = reader.buffer().to_vec();
        let config = WebSocketConfig::default().max_message_size(Some(MAX_LINE_BYTES));
        let ws = WebSocket::from_partially_read(reader.into_inner(), buffered, Role::Server, Some(config));
        return serve_websocket(ws, engine);
    }
    let response = match req.path.split('?').next() {
        Some("/catalog") => http_response("200 OK", "application/json", &engine.catalog().to_json()),
        _ => http_response("404 Not Found", "text/plain", "not found\n"),
    };
    writer.write_all(response.as_bytes())
}

/// Oversized or broken frames end the connection; a session in progress is
/// then denied like any other disconnect.
fn serve_websocket(mut ws: WebSocket<TcpStream>, engine: Arc<AuthEngine>) -> std::io::Result<()> {
    let mut conn = Connection::new(engine);
    let send = |ws: &mut WebSocket<TcpStream>, replies: Vec<ServerMessage>| -> tungstenite::Result<()> {
        for m in replies {
            let mut line = m.to_line();
            line.pop();
            ws.write(Message::text(line))?;
        }
        ws.flush()
    };
    loop {
        let replies = match ws.read() {
            Ok(Message::Text(t)) => conn.handle_line(t.as_bytes()),
            Ok(Message::Binary(b)) => conn.handle_line(&b),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        if send(&mut ws, replies).is_err() {
            break;
        }
    }
    conn.disconnect();
    Ok(())
}
