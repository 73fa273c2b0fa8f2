mod common;

use std::io::{Read, Write};
use std::sync::Arc;

use gazepass::auth::{AuthConfig, AuthEngine, ManualClock};
use gazepass::catalog::ShapeId;
use gazepass::service;
use gazepass::sim::NoiseModel;
use serde_json::json;

use common::{catalog, engine_without_limits, follow, leak_free, Client};

fn frames(shapes: [ShapeId; 3], seed: u64) -> Vec<gazepass::RawTrace> {
    let cat = catalog();
    shapes
        .iter()
        .enumerate()
        .map(|(i, &id)| follow(&cat, id, &NoiseModel::default().with_seed(seed * 3 + i as u64)))
        .collect()
}

#[test]
fn gaze_point_before_session_start() {
    let handle = service::spawn("127.0.0.1:0", Arc::new(engine_without_limits())).unwrap();
    let mut c = Client::connect(handle.addr());
    let reply = c.request(&json!({"type": "gaze_point", "nonce": "x", "t": 0.0, "x": 1.0, "y": 1.0}));
    assert_eq!(reply["type"], "error");
    assert_eq!(reply["code"], "no_session");
    // connection stays usable
    assert_eq!(c.request(&json!({"type": "hello"}))["type"], "hello");
}

#[test]
fn unknown_types_and_long_lines_keep_the_connection() {
    let handle = service::spawn("127.0.0.1:0", Arc::new(engine_without_limits())).unwrap();
    let mut c = Client::connect(handle.addr());
    assert_eq!(c.request(&json!({"type": "teleport"}))["code"], "unknown_type");
    c.send_raw(&[b'{'; 100_000]);
    c.send_raw(b"\n");
    assert_eq!(c.recv()["code"], "line_too_long");
    c.send_raw(b"\xff\xfe\n");
    assert_eq!(c.recv()["code"], "malformed");
    assert_eq!(c.request(&json!({"type": "hello"}))["type"], "hello");
}

#[test]
fn short_frame_is_acknowledged_and_denied() {
    let engine = Arc::new(engine_without_limits());
    let handle = service::spawn("127.0.0.1:0", engine).unwrap();
    let mut c = Client::connect(handle.addr());
    c.request(&json!({"type": "enroll", "user": "dave", "triple": "d,a,e"}));
    let mut f = frames([ShapeId::D, ShapeId::A, ShapeId::E], 1);
    assert_eq!(c.authenticate("dave", "template", &f), Some(true));
    f[0] = gazepass::RawTrace::new(f[0].samples()[..10].to_vec()).unwrap();
    assert_eq!(c.authenticate("dave", "template", &f), Some(false));
    for m in &c.log {
        leak_free(m).unwrap();
    }
}

#[test]
fn interleaved_sessions_match_sequential_runs() {
    let engine = Arc::new(engine_without_limits());
    let users = [
        ("u0", [ShapeId::A, ShapeId::B, ShapeId::C]),
        ("u1", [ShapeId::L, ShapeId::L, ShapeId::K]),
        ("u2", [ShapeId::F, ShapeId::G, ShapeId::H]),
        ("u3", [ShapeId::I, ShapeId::J, ShapeId::E]),
    ];
    let scripts: Vec<_> = users
        .iter()
        .enumerate()
        .flat_map(|(n, (user, pw))| {
            let mut wrong = *pw;
            wrong[n % 3] = ShapeId::ALL[(wrong[n % 3].index() + 1) % 12];
            vec![(*user, frames(*pw, n as u64)), (*user, frames(wrong, 10 + n as u64))]
        })
        .collect();
    let handle = service::spawn("127.0.0.1:0", engine.clone()).unwrap();
    let mut setup = Client::connect(handle.addr());
    for (user, pw) in &users {
        let triple = pw.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",");
        assert_eq!(setup.request(&json!({"type": "enroll", "user": user, "triple": triple}))["type"], "enroll_ok");
    }

    let sequential: Vec<_> = scripts
        .iter()
        .map(|(user, f)| setup.authenticate(user, "template", f).unwrap())
        .collect();
    let addr = handle.addr();
    let concurrent: Vec<_> = std::thread::scope(|s| {
        let jobs: Vec<_> = scripts
            .iter()
            .map(|(user, f)| s.spawn(move || Client::connect(addr).authenticate(user, "template", f).unwrap()))
            .collect();
        jobs.into_iter().map(|j| j.join().unwrap()).collect()
    });
    assert_eq!(sequential, concurrent);
    assert_eq!(sequential, [true, false, true, false, true, false, true, false]);
}

#[test]
fn rate_limits_surface_as_errors() {
    let clock = Arc::new(ManualClock::new(0));
    let engine = AuthEngine::new(catalog(), AuthConfig::default())
        .unwrap()
        .with_clock(clock.clone());
    let handle = service::spawn("127.0.0.1:0", Arc::new(engine)).unwrap();
    let mut c = Client::connect(handle.addr());
    c.request(&json!({"type": "enroll", "user": "eve", "triple": "a,b,c"}));
    let wrong = frames([ShapeId::D, ShapeId::D, ShapeId::D], 3);
    assert_eq!(c.authenticate("eve", "template", &wrong), Some(false));
    assert_eq!(c.authenticate("eve", "template", &wrong), None);
    assert_eq!(c.log.last().unwrap()["code"], "rate_limited");
    for _ in 0..4 {
        clock.advance(2_000);
        assert_eq!(c.authenticate("eve", "template", &wrong), Some(false));
    }
    clock.advance(2_000);
    assert_eq!(c.authenticate("eve", "template", &wrong), None);
    assert_eq!(c.log.last().unwrap()["code"], "locked_out");
}

#[test]
fn disconnect_mid_session_counts_as_denial() {
    let clock = Arc::new(ManualClock::new(0));
    let engine = Arc::new(
        AuthEngine::new(catalog(), AuthConfig::default())
            .unwrap()
            .with_clock(clock.clone()),
    );
    let handle = service::spawn("127.0.0.1:0", engine.clone()).unwrap();
    let mut c = Client::connect(handle.addr());
    c.request(&json!({"type": "enroll", "user": "fay", "triple": "a,b,c"}));
    let begin = c.request(&json!({"type": "session_start", "user": "fay"}));
    assert_eq!(begin["type"], "frame_begin");
    assert_eq!(begin["frame_index"], 1);
    assert_eq!(begin["catalog_version"], engine.catalog().version());
    drop(c);
    // the aborted session is recorded as decided, so an immediate retry is
    // refused by the minimum interval
    let mut refused = false;
    for _ in 0..200 {
        if matches!(engine.begin_session("fay", None), Err(gazepass::Error::RateLimited)) {
            refused = true;
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(10));
    }
    assert!(refused);
}

#[test]
fn hello_carries_the_catalog() {
    let handle = service::spawn("127.0.0.1:0", Arc::new(engine_without_limits())).unwrap();
    let mut c = Client::connect(handle.addr());
    let hello = c.request(&json!({"type": "hello"}));
    let cat = gazepass::Catalog::from_json(&hello["catalog"].to_string()).unwrap();
    assert_eq!(cat, gazepass::Catalog::shipped());
    assert_eq!(hello["protocol"], 1);
}

#[test]
fn catalog_is_served_over_http() {
    let handle = service::spawn("127.0.0.1:0", Arc::new(engine_without_limits())).unwrap();
    let mut stream = std::net::TcpStream::connect(handle.addr()).unwrap();
    stream.write_all(b"GET /catalog HTTP/1.1\r\nHost: localhost\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let (head, body) = response.split_once("\r\n\r\n").unwrap();
    assert!(head.starts_with("HTTP/1.1 200"), "{head}");
    assert!(head.contains("Content-Type: application/json"));
    assert_eq!(gazepass::Catalog::from_json(body).unwrap(), gazepass::Catalog::shipped());

    let mut stream = std::net::TcpStream::connect(handle.addr()).unwrap();
    stream.write_all(b"GET /nothing HTTP/1.1\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    assert!(response.starts_with("HTTP/1.1 404"));
}

#[test]
fn websocket_sessions_match_line_sessions() {
    let engine = Arc::new(engine_without_limits());
    let handle = service::spawn("127.0.0.1:0", engine).unwrap();
    let mut c = Client::connect(handle.addr());
    c.request(&json!({"type": "enroll", "user": "gil", "triple": "h,i,j"}));
    let right = frames([ShapeId::H, ShapeId::I, ShapeId::J], 5);
    let wrong = frames([ShapeId::H, ShapeId::J, ShapeId::J], 6);
    let lines = [c.authenticate("gil", "template", &right), c.authenticate("gil", "template", &wrong)];
    assert_eq!(lines, [Some(true), Some(false)]);

    let stream = std::net::TcpStream::connect(handle.addr()).unwrap();
    let url = format!("ws://{}/session", handle.addr());
    let (mut ws, _) = tungstenite::client::client(url.as_str(), stream).unwrap();
    let recv = |ws: &mut tungstenite::WebSocket<std::net::TcpStream>| -> serde_json::Value {
        let msg = ws.read().unwrap();
        let v: serde_json::Value = serde_json::from_str(msg.to_text().unwrap()).unwrap();
        leak_free(&v).unwrap();
        v
    };
    let send = |ws: &mut tungstenite::WebSocket<std::net::TcpStream>, v: serde_json::Value| {
        ws.send(tungstenite::Message::text(v.to_string())).unwrap();
    };
    send(&mut ws, json!({"type": "hello"}));
    assert_eq!(recv(&mut ws)["catalog"]["version"], catalog().version());
    let mut results = Vec::new();
    for f in [&right, &wrong] {
        send(&mut ws, json!({"type": "session_start", "user": "gil", "algorithm": "template"}));
        let begin = recv(&mut ws);
        let nonce = begin["nonce"].as_str().unwrap().to_owned();
        for (i, trace) in f.iter().enumerate() {
            for s in trace.samples() {
                send(&mut ws, json!({"type": "gaze_point", "nonce": nonce, "t": s.t, "x": s.p.x, "y": s.p.y}));
            }
            send(&mut ws, json!({"type": "frame_end", "nonce": nonce}));
            assert_eq!(recv(&mut ws)["frame_index"], i + 1);
            let next = recv(&mut ws);
            if i == 2 {
                results.push(next["granted"].as_bool());
            }
        }
    }
    assert_eq!(results, lines);

    send(&mut ws, json!({"type": "teleport"}));
    assert_eq!(recv(&mut ws)["code"], "unknown_type");
}
