//! Event sources and sinks for `fdastream stream`.

use std::path::Path;
use std::time::Duration;

use fdastream_core::engine::RawPanel;
use fdastream_core::ingestion::{column_events, panel_prefix, parse_wide_csv, read_events, EventSink, StreamEvent};
use fdastream_core::{Error, Result};

/// What a stream input file turns into.
pub struct StreamInput {
    /// Panel to seed an in-process engine with, if the input provides one.
    pub seed: Option<RawPanel>,
    pub events: Vec<StreamEvent>,
}

/// Load `path` as JSON-lines events (`.jsonl`, `.ndjson`) or as a wide CSV
/// panel whose columns after the first `warmup` become `add_time_point` events.
pub fn load_input(path: &Path, warmup: usize) -> Result<StreamInput> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if ext == "jsonl" || ext == "ndjson" {
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let events = read_events(std::io::BufReader::new(file)).into_iter().collect::<Result<Vec<_>>>()?;
        return Ok(StreamInput { seed: None, events });
    }
    let panel = parse_wide_csv(path)?;
    let warmup = warmup.min(panel.n_times());
    let seed = if warmup > 0 { Some(panel_prefix(&panel, warmup)?) } else { None };
    Ok(StreamInput { seed, events: column_events(&panel, warmup) })
}

/// Posts each event to a running service.
pub struct HttpSink {
    client: reqwest::blocking::Client,
    url: String,
    retries: u32,
    backoff: Duration,
}

impl HttpSink {
    pub fn new(server: &str, retries: u32, backoff: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| Error::Io(e.to_string()))?;
        Ok(HttpSink { client, url: format!("{}/ingest", server.trim_end_matches('/')), retries, backoff })
    }
}

impl EventSink for HttpSink {
    fn deliver(&mut self, event: &StreamEvent) -> Result<()> {
        let body = event.to_json_line();
        let mut attempt = 0;
        loop {
            let sent = self
                .client
                .post(&self.url)
                .header("content-type", "application/json")
                .body(body.clone())
                .send();
            match sent {
                Ok(resp) if resp.status().is_success() => return Ok(()),
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    // the server rejected the event; retrying will not help
                    return Err(Error::InvalidOperation(format!("server rejected event ({status}): {text}")));
                }
                Err(e) if attempt < self.retries => {
                    attempt += 1;
                    log::warn!("delivery failed ({e}); retry {attempt}/{}", self.retries);
                    std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
                }
                Err(e) => return Err(Error::Io(format!("{}: {e}", self.url))),
            }
        }
    }
}

/// Latency histogram over log-spaced buckets, one line per non-empty bucket.
pub fn latency_histogram(samples_s: &[f64]) -> Vec<(String, usize)> {
    const EDGES_US: [f64; 9] = [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6, 1e7, f64::INFINITY];
    const NAMES: [&str; 9] = ["<1us", "<10us", "<100us", "<1ms", "<10ms", "<100ms", "<1s", "<10s", ">=10s"];
    let mut counts = [0usize; 9];
    for s in samples_s {
        let us = s * 1e6;
        let i = EDGES_US.iter().position(|&e| us < e).unwrap_or(8);
        counts[i] += 1;
    }
    NAMES.iter().zip(counts).filter(|(_, c)| *c > 0).map(|(n, c)| (n.to_string(), c)).collect()
}
