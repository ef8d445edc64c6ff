#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use fdastream_core::engine::RawPanel;
use fdastream_service::{Hub, HubOptions, ServiceConfig};
use futures::StreamExt;
use serde_json::Value;

pub struct Server {
    pub base: String,
    pub hub: Arc<Hub>,
    pub client: reqwest::Client,
}

pub async fn start(config: ServiceConfig, panel: Option<RawPanel>) -> Server {
    start_with(config, panel, HubOptions::default()).await
}

pub async fn start_with(config: ServiceConfig, panel: Option<RawPanel>, options: HubOptions) -> Server {
    let hub = Hub::new(config, panel, options).unwrap();
    let (listener, addr) = fdastream_service::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    tokio::spawn(fdastream_service::serve(listener, Arc::clone(&hub)));
    Server { base: format!("http://{addr}"), hub, client: reqwest::Client::new() }
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(self.url(path)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn get_text(&self, path: &str) -> String {
        self.client.get(self.url(path)).send().await.unwrap().text().await.unwrap()
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let r = self.client.post(self.url(path)).json(body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn put(&self, path: &str, body: &Value) -> (u16, Value) {
        let r = self.client.put(self.url(path)).json(body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub async fn subscribe(&self, query: &str) -> Subscription {
        let r = self.client.get(self.url(&format!("/events{query}"))).send().await.unwrap();
        assert_eq!(r.status().as_u16(), 200);
        Subscription { stream: Box::pin(r.bytes_stream()), buf: String::new() }
    }
}

/// Minimal server-sent-events reader.
pub struct Subscription {
    stream: std::pin::Pin<Box<dyn futures::Stream<Item = reqwest::Result<axum::body::Bytes>> + Send>>,
    buf: String,
}

impl Subscription {
    /// Next `(event, data)` pair, or `None` on timeout or end of stream.
    pub async fn next(&mut self, timeout: Duration) -> Option<(String, Value)> {
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                let mut name = String::new();
                let mut data = String::new();
                for line in block.lines() {
                    if let Some(v) = line.strip_prefix("event:") {
                        name = v.trim().to_string();
                    } else if let Some(v) = line.strip_prefix("data:") {
                        data.push_str(v.trim_start());
                    }
                }
                if name.is_empty() && data.is_empty() {
                    continue;
                }
                return Some((name, serde_json::from_str(&data).unwrap_or(Value::Null)));
            }
            match tokio::time::timeout(timeout, self.stream.next()).await {
                Ok(Some(Ok(chunk))) => self.buf.push_str(&String::from_utf8_lossy(&chunk)),
                _ => return None,
            }
        }
    }

    /// Collect events until the first heartbeat (exclusive).
    pub async fn until_heartbeat(&mut self, timeout: Duration) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        while let Some((name, data)) = self.next(timeout).await {
            if name == "heartbeat" {
                break;
            }
            out.push((name, data));
        }
        out
    }
}

pub fn constant_fixture() -> RawPanel {
    RawPanel::from_rows(vec![vec![1.0; 4], vec![2.0; 4], vec![3.0; 4]]).unwrap()
}

pub fn fast_heartbeat() -> ServiceConfig {
    let mut c = ServiceConfig::default();
    c.push.heartbeat_s = 0.3;
    c
}
