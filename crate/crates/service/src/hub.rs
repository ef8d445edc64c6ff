use std::sync::{Arc, Mutex, MutexGuard, PoisonError, RwLock};

use fdastream_core::engine::{Applied, Engine, Label, RawPanel};
use fdastream_core::ingestion::StreamEvent;
use fdastream_core::{MsSnapshot, Result};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, Semaphore};

use crate::config::ServiceConfig;
use crate::events::ServerEvent;

/// Static sensor placement served by `GET /layout`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub id: String,
    pub row: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct HubOptions {
    /// Events buffered per subscriber before it is cut off.
    pub subscriber_buffer: usize,
    /// Concurrent FPCA computations.
    pub fpca_workers: usize,
    pub layout: Option<Vec<LayoutEntry>>,
}

impl Default for HubOptions {
    fn default() -> Self {
        HubOptions {
            subscriber_buffer: 1024,
            fpca_workers: std::thread::available_parallelism().map_or(2, |n| n.get()),
            layout: None,
        }
    }
}

/// Engine plus the push bookkeeping that must change atomically with it.
struct Writer {
    engine: Engine,
    /// Time points added in the current epoch.
    points_in_epoch: u64,
    /// Deltas emitted in the current epoch.
    seq: u64,
    last_degenerate: usize,
}

/// Result of one `POST /ingest`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestOutcome {
    pub status: &'static str,
    pub epoch: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low_confidence: Option<bool>,
    pub recompute_scheduled: bool,
}

/// Shared service state. All engine mutations go through one lock; readers
/// get the last published snapshot without touching the engine.
pub struct Hub {
    writer: Mutex<Writer>,
    config: RwLock<ServiceConfig>,
    snapshot: RwLock<Option<Arc<MsSnapshot>>>,
    tx: broadcast::Sender<ServerEvent>,
    pub(crate) fpca_slots: Semaphore,
    pub(crate) layout: Option<Vec<LayoutEntry>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

impl Hub {
    pub fn new(config: ServiceConfig, panel: Option<RawPanel>, options: HubOptions) -> Result<Arc<Hub>> {
        config.validate()?;
        let engine = match panel {
            Some(p) => Engine::with_panel(p, config.engine)?,
            None => Engine::new(config.engine)?,
        };
        let (tx, _) = broadcast::channel(options.subscriber_buffer.max(1));
        let hub = Hub {
            writer: Mutex::new(Writer { engine, points_in_epoch: 0, seq: 0, last_degenerate: 0 }),
            config: RwLock::new(config),
            snapshot: RwLock::new(None),
            tx,
            fpca_slots: Semaphore::new(options.fpca_workers.max(1)),
            layout: options.layout,
        };
        {
            let mut w = lock(&hub.writer);
            hub.publish(&mut w);
        }
        Ok(Arc::new(hub))
    }

    pub fn config(&self) -> ServiceConfig {
        self.config.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    pub fn set_config(&self, config: ServiceConfig) -> Result<()> {
        config.validate()?;
        let mut w = lock(&self.writer);
        w.engine.set_config(config.engine)?;
        *self.config.write().unwrap_or_else(PoisonError::into_inner) = config;
        self.publish(&mut w);
        Ok(())
    }

    /// Last published MS-plot snapshot.
    pub fn snapshot(&self) -> Option<Arc<MsSnapshot>> {
        self.snapshot.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServerEvent> {
        self.tx.subscribe()
    }

    /// Run `f` against the engine under the writer lock.
    pub fn with_engine<R>(&self, f: impl FnOnce(&Engine) -> R) -> R {
        f(&lock(&self.writer).engine)
    }

    fn emit(&self, event: ServerEvent) {
        // no subscribers is fine
        let _ = self.tx.send(event);
    }

    fn publish(&self, w: &mut Writer) -> Option<MsSnapshot> {
        let snap = w.engine.snapshot();
        *self.snapshot.write().unwrap_or_else(PoisonError::into_inner) = snap.clone().map(Arc::new);
        let degenerate = w.engine.degenerate_count();
        if degenerate > 0 && degenerate != w.last_degenerate {
            self.emit(ServerEvent::DegenerateWarning { epoch: w.engine.epoch(), degenerate_count: degenerate });
        }
        w.last_degenerate = degenerate;
        snap
    }

    fn delta(&self, w: &mut Writer, snapshot: MsSnapshot) {
        w.seq += 1;
        self.emit(ServerEvent::MsplotDelta { seq: w.seq, snapshot });
    }

    fn start_epoch(w: &mut Writer) {
        w.points_in_epoch = 0;
        w.seq = 0;
    }

    /// Publish the effect of one applied event. Returns whether a refit is due.
    fn after_apply(&self, w: &mut Writer, applied: &Applied) -> bool {
        let ppu = self.config().push.points_per_update as u64;
        match applied {
            Applied::Queued => false,
            Applied::TimePointAdded => {
                w.points_in_epoch += 1;
                let snap = self.publish(w);
                if w.points_in_epoch % ppu == 0 {
                    if let Some(s) = snap {
                        self.delta(w, s);
                    }
                }
                false
            }
            Applied::TimePointRemoved => {
                self.publish(w);
                false
            }
            Applied::Initialized => {
                Self::start_epoch(w);
                if let Some(s) = self.publish(w) {
                    self.delta(w, s);
                }
                false
            }
            Applied::SeriesAdded { recompute_scheduled, .. } | Applied::SeriesRemoved { recompute_scheduled, .. } => {
                if let Some(s) = self.publish(w) {
                    self.delta(w, s);
                }
                *recompute_scheduled
            }
        }
    }

    /// Validate and apply one event. Rejected events leave the engine untouched.
    pub fn ingest(self: &Arc<Self>, event: StreamEvent) -> Result<IngestOutcome> {
        let mut w = lock(&self.writer);
        let applied = w.engine.apply(event)?;
        let due = self.after_apply(&mut w, &applied);
        let (kl, low_confidence) = match &applied {
            Applied::SeriesAdded { drift, .. } | Applied::SeriesRemoved { drift, .. } => {
                (Some(drift.kl), Some(drift.low_confidence))
            }
            _ => (None, None),
        };
        let outcome = IngestOutcome {
            status: if matches!(applied, Applied::Queued) { "queued" } else { "applied" },
            epoch: w.engine.epoch(),
            kl,
            low_confidence,
            recompute_scheduled: due,
        };
        drop(w);
        if due {
            self.spawn_recompute();
        }
        Ok(outcome)
    }

    /// Ask for a full refit. Returns false when one is already pending.
    pub fn request_recompute(self: &Arc<Self>) -> bool {
        let requested = lock(&self.writer).engine.request_recompute();
        if requested {
            self.spawn_recompute();
        }
        requested
    }

    /// Drive pending refits on the blocking pool until none is due.
    fn spawn_recompute(self: &Arc<Self>) {
        let hub = Arc::clone(self);
        tokio::spawn(async move {
            loop {
                let job = {
                    let mut w = lock(&hub.writer);
                    let Some(job) = w.engine.begin_recompute() else { break };
                    hub.emit(ServerEvent::RecomputeStarted { epoch: w.engine.epoch(), target_epoch: job.epoch() });
                    job
                };
                let result = tokio::task::spawn_blocking(move || job.run()).await;
                let mut w = lock(&hub.writer);
                match result {
                    Ok(Ok(output)) => {
                        let replayed = w.engine.finish_recompute(output);
                        Self::start_epoch(&mut w);
                        if let Some(s) = hub.publish(&mut w) {
                            hub.emit(ServerEvent::RecomputeDone { snapshot: s });
                        }
                        for applied in replayed.iter().flatten() {
                            hub.after_apply(&mut w, applied);
                        }
                    }
                    Ok(Err(e)) => {
                        log::error!("refit failed: {e}");
                        w.engine.abort_recompute();
                        break;
                    }
                    Err(e) => {
                        log::error!("refit task panicked: {e}");
                        w.engine.abort_recompute();
                        break;
                    }
                }
            }
        });
    }

    /// Layout cells with the number of currently outlying series in each.
    pub fn layout_cells(&self) -> Option<Vec<LayoutCell>> {
        let layout = self.layout.as_ref()?;
        let snap = self.snapshot();
        let mut cells: std::collections::BTreeMap<(u32, u32), LayoutCell> = Default::default();
        for e in layout {
            let cell = cells
                .entry((e.row, e.col))
                .or_insert_with(|| LayoutCell { row: e.row, col: e.col, ids: Vec::new(), outlier_count: 0 });
            cell.ids.push(e.id.clone());
            if snap.as_ref().and_then(|s| s.point(&e.id)).is_some_and(|p| p.label == Label::Outlying) {
                cell.outlier_count += 1;
            }
        }
        Some(cells.into_values().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutCell {
    pub row: u32,
    pub col: u32,
    pub ids: Vec<String>,
    pub outlier_count: usize,
}
