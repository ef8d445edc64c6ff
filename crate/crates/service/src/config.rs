use fdastream_core::engine::EngineConfig;
use fdastream_core::fpca::FpcaConfig;
use fdastream_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// When time-point additions are pushed to subscribers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PushPolicy {
    /// One `msplot_delta` per this many added time points.
    pub points_per_update: usize,
    /// Seconds between heartbeats on idle subscriptions.
    pub heartbeat_s: f64,
}

impl Default for PushPolicy {
    fn default() -> Self {
        PushPolicy { points_per_update: 10, heartbeat_s: 15.0 }
    }
}

/// Everything exposed by `GET /config` and adjustable with `PUT /config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub push: PushPolicy,
    pub engine: EngineConfig,
    pub fpca: FpcaConfig,
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.push.points_per_update == 0 {
            return Err(Error::Config("points_per_update must be >= 1".into()));
        }
        if !(self.push.heartbeat_s > 0.0) {
            return Err(Error::Config(format!("heartbeat_s must be > 0, got {}", self.push.heartbeat_s)));
        }
        self.engine.validate()?;
        self.fpca.validate()
    }

    /// Apply a partial JSON document on top of this configuration.
    pub fn merged(&self, patch: serde_json::Value) -> Result<ServiceConfig> {
        let mut base = serde_json::to_value(self).expect("config serializes");
        merge(&mut base, patch);
        let cfg: ServiceConfig = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}
