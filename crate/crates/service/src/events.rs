use fdastream_core::MsSnapshot;
use serde::Serialize;

/// Messages pushed to `GET /events` subscribers.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerEvent {
    /// Current MS-plot points. `seq` counts deltas within the epoch.
    MsplotDelta {
        seq: u64,
        #[serde(flatten)]
        snapshot: MsSnapshot,
    },
    RecomputeStarted { epoch: u64, target_epoch: u64 },
    RecomputeDone {
        #[serde(flatten)]
        snapshot: MsSnapshot,
    },
    DegenerateWarning { epoch: u64, degenerate_count: usize },
    /// Full state for a (re)connecting subscriber.
    Resync {
        #[serde(flatten)]
        snapshot: MsSnapshot,
    },
    Heartbeat { epoch: u64 },
}

impl ServerEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ServerEvent::MsplotDelta { .. } => "msplot_delta",
            ServerEvent::RecomputeStarted { .. } => "recompute_started",
            ServerEvent::RecomputeDone { .. } => "recompute_done",
            ServerEvent::DegenerateWarning { .. } => "degenerate_warning",
            ServerEvent::Resync { .. } => "resync",
            ServerEvent::Heartbeat { .. } => "heartbeat",
        }
    }
}
