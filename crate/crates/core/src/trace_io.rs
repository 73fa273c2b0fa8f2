//! JSON Lines trace files: one `{"t": ms, "x": px, "y": px}` object per
//! sample, in time order.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RawTrace, TimedSample};

#[derive(Serialize, Deserialize)]
struct Line {
    t: f64,
    x: f64,
    y: f64,
}

pub fn read_samples(reader: impl BufRead) -> Result<Vec<TimedSample>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(format!("trace line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("trace line {}: {e}", n + 1)))?;
        out.push(TimedSample::new(l.t, l.x, l.y));
    }
    Ok(out)
}

pub fn read_trace(reader: impl BufRead) -> Result<RawTrace> {
    RawTrace::new(read_samples(reader)?)
}

pub fn read_trace_file(path: &std::path::Path) -> Result<RawTrace> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
        _ => Error::storage(path, e),
    })?;
    read_trace(std::io::BufReader::new(file))
}

pub fn to_jsonl(trace: &RawTrace) -> String {
    let mut out = String::new();
    for s in trace.samples() {
        let line = Line {
            t: s.t,
            x: s.p.x,
            y: s.p.y,
        };
        out.push_str(&serde_json::to_string(&line).expect("finite sample"));
        out.push('\n');
    }
    out
}
