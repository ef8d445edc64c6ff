//! Magnitude-shape outlyingness engine.
//!
//! [`Engine`] owns the raw panel, the running outlyingness state and the drift
//! monitor. Time points are folded in exactly; new series are admitted
//! against cached medians and a full refit is scheduled when the drift gate
//! trips. While a refit is pending or running, incoming events are queued and
//! replayed on the fresh state before it becomes visible, so incremental and
//! progressive updates never interleave.

pub mod classify;
pub mod drift;
pub mod panel;
pub mod state;
pub mod stats;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use classify::{classify, ClassifyBands, Label};
pub use drift::{drift_check, DriftConfig, DriftMonitor, DriftScore};
pub use panel::RawPanel;
pub use state::{Outlyingness, OutlyingnessState};
pub use stats::{cross_section_stats, directional_outlyingness, CrossSectionStats};

use crate::error::{Error, Result};
use crate::ingestion::StreamEvent;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub drift: DriftConfig,
    pub bands: ClassifyBands,
    /// Keep at most this many time points, dropping the oldest.
    pub retention_window: Option<usize>,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.drift.validate()?;
        self.bands.validate()?;
        if self.retention_window == Some(0) {
            return Err(Error::Config("retention_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// One circle of the MS plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsPoint {
    pub id: String,
    pub mo: f64,
    pub vo: f64,
    pub label: Label,
    pub approximate: bool,
}

/// Immutable MS-plot view taken from a single epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsSnapshot {
    pub epoch: u64,
    pub t_count: usize,
    pub points: Vec<MsPoint>,
}

impl MsSnapshot {
    pub fn point(&self, id: &str) -> Option<&MsPoint> {
        self.points.iter().find(|p| p.id == id)
    }
}

/// What an applied event did.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    /// The engine was empty and the event seeded it with an exact fit.
    Initialized,
    TimePointAdded,
    TimePointRemoved,
    SeriesAdded { point: MsPoint, drift: DriftScore, recompute_scheduled: bool },
    SeriesRemoved { drift: DriftScore, recompute_scheduled: bool },
    /// A refit is pending or running; the event will be replayed afterwards.
    Queued,
}

/// Work item for a background refit. Owns a copy of the panel so it can run
/// without holding the engine.
#[derive(Debug, Clone)]
pub struct RecomputeJob {
    panel: RawPanel,
    epoch: u64,
}

impl RecomputeJob {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn run(self) -> Result<RecomputeOutput> {
        let state = OutlyingnessState::batch_fit(&self.panel, self.epoch)?;
        Ok(RecomputeOutput { state })
    }
}

#[derive(Debug, Clone)]
pub struct RecomputeOutput {
    state: OutlyingnessState,
}

#[derive(Debug, Clone)]
struct Fitted {
    panel: RawPanel,
    state: OutlyingnessState,
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    fitted: Option<Fitted>,
    drift: DriftMonitor,
    in_flight: bool,
    queue: VecDeque<StreamEvent>,
    epoch: u64,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Engine {
            config,
            fitted: None,
            drift: DriftMonitor::new(config.drift),
            in_flight: false,
            queue: VecDeque::new(),
            epoch: 0,
        })
    }

    /// Engine seeded with an exact fit of `panel` (epoch 1).
    pub fn with_panel(panel: RawPanel, config: EngineConfig) -> Result<Self> {
        let mut engine = Engine::new(config)?;
        engine.batch_fit(panel)?;
        Ok(engine)
    }

    /// Replace everything with an exact fit of `panel`. Bumps the epoch.
    pub fn batch_fit(&mut self, panel: RawPanel) -> Result<()> {
        let state = OutlyingnessState::batch_fit(&panel, self.epoch + 1)?;
        self.epoch += 1;
        self.fitted = Some(Fitted { panel, state });
        self.drift.reset();
        self.enforce_retention()?;
        Ok(())
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: EngineConfig) -> Result<()> {
        config.validate()?;
        self.config = config;
        self.drift.config = config.drift;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.fitted.is_none()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn panel(&self) -> Option<&RawPanel> {
        self.fitted.as_ref().map(|f| &f.panel)
    }

    pub fn state(&self) -> Option<&OutlyingnessState> {
        self.fitted.as_ref().map(|f| &f.state)
    }

    pub fn drift_monitor(&self) -> &DriftMonitor {
        &self.drift
    }

    pub fn degenerate_count(&self) -> usize {
        self.state().map_or(0, OutlyingnessState::degenerate_count)
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// A refit was requested and has not completed yet.
    pub fn recompute_pending(&self) -> bool {
        self.drift.pending_recompute || self.in_flight
    }

    pub fn recompute_in_flight(&self) -> bool {
        self.in_flight
    }

    /// Request a full refit. Coalesces with any pending or running request.
    pub fn request_recompute(&mut self) -> bool {
        if self.recompute_pending() || self.fitted.is_none() {
            return false;
        }
        self.drift.pending_recompute = true;
        true
    }

    /// Hand out the pending refit, if one is due and none is running.
    pub fn begin_recompute(&mut self) -> Option<RecomputeJob> {
        if self.in_flight || !self.drift.pending_recompute {
            return None;
        }
        let fitted = self.fitted.as_ref()?;
        self.in_flight = true;
        Some(RecomputeJob { panel: fitted.panel.clone(), epoch: self.epoch + 1 })
    }

    /// Swap in a finished refit and replay everything queued meanwhile.
    ///
    /// Returns the outcomes of the replayed events; replay errors are logged
    /// and the offending event dropped.
    pub fn finish_recompute(&mut self, output: RecomputeOutput) -> Vec<Result<Applied>> {
        debug_assert!(self.in_flight);
        self.in_flight = false;
        self.drift.reset();
        self.epoch = output.state.epoch;
        if let Some(f) = self.fitted.as_mut() {
            f.state = output.state;
        }
        let mut outcomes = Vec::with_capacity(self.queue.len());
        while let Some(ev) = self.queue.pop_front() {
            if self.recompute_pending() {
                // A replayed admission tripped the gate again; keep the rest queued.
                self.queue.push_front(ev);
                break;
            }
            let r = self.apply_now(ev);
            if let Err(e) = &r {
                log::warn!("dropping queued event after refit: {e}");
            }
            outcomes.push(r);
        }
        outcomes
    }

    /// Abandon a running refit (e.g. the worker failed); the request stays pending.
    pub fn abort_recompute(&mut self) {
        self.in_flight = false;
    }

    /// Run any pending refit inline.
    pub fn run_pending_recompute(&mut self) -> Result<bool> {
        let mut ran = false;
        while let Some(job) = self.begin_recompute() {
            match job.run() {
                Ok(out) => {
                    self.finish_recompute(out);
                    ran = true;
                }
                Err(e) => {
                    self.abort_recompute();
                    return Err(e);
                }
            }
        }
        Ok(ran)
    }

    /// Apply a stream event, or queue it while a refit is pending.
    ///
    /// Events are validated before queueing so rejected input never enters the
    /// queue. Failed events leave the engine unchanged.
    pub fn apply(&mut self, event: StreamEvent) -> Result<Applied> {
        if self.recompute_pending() {
            self.prevalidate(&event)?;
            self.queue.push_back(event);
            return Ok(Applied::Queued);
        }
        self.apply_now(event)
    }

    pub fn add_time_point(&mut self, ts: Option<f64>, values: Vec<f64>) -> Result<Applied> {
        self.apply(StreamEvent::AddTimePoint { values, ts })
    }

    pub fn remove_time_point(&mut self, index: usize) -> Result<Applied> {
        self.apply(StreamEvent::RemoveTimePoint { index, ts: None })
    }

    pub fn add_series(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<Applied> {
        self.apply(StreamEvent::AddSeries { id: id.into(), values, ts: None })
    }

    pub fn remove_series(&mut self, id: impl Into<String>) -> Result<Applied> {
        self.apply(StreamEvent::RemoveSeries { id: id.into(), ts: None })
    }

    fn prevalidate(&self, event: &StreamEvent) -> Result<()> {
        let finite = |values: &[f64]| match values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite { series: i, time: 0 }),
            None => Ok(()),
        };
        match event {
            StreamEvent::AddTimePoint { values, .. } => finite(values),
            StreamEvent::AddSeries { values, .. } => finite(values),
            _ => Ok(()),
        }
    }

    fn apply_now(&mut self, event: StreamEvent) -> Result<Applied> {
        let Some(f) = self.fitted.as_mut() else {
            return self.initialize(event);
        };
        match event {
            StreamEvent::AddTimePoint { values, ts } => {
                f.state.add_time_point(&mut f.panel, ts, &values)?;
                self.enforce_retention()?;
                Ok(Applied::TimePointAdded)
            }
            StreamEvent::RemoveTimePoint { index, .. } => {
                f.state.remove_time_point(&mut f.panel, index)?;
                Ok(Applied::TimePointRemoved)
            }
            StreamEvent::AddSeries { id, values, .. } => {
                f.panel.validate_series(&id, &values)?;
                let drift = drift_check(f.state.stats(), &values, self.drift.config.bin_count);
                let out = f.state.add_series_approx(&mut f.panel, id.clone(), values)?;
                let recompute_scheduled = self.drift.admit(&drift);
                if drift.low_confidence {
                    log::debug!("drift estimate for '{id}' uses fewer time points than bins");
                }
                let labels = self.labels();
                let n = labels.len() - 1;
                let point =
                    MsPoint { id, mo: out.mo, vo: out.vo(), label: labels[n], approximate: true };
                Ok(Applied::SeriesAdded { point, drift, recompute_scheduled })
            }
            StreamEvent::RemoveSeries { id, .. } => {
                let n = f.panel.position(&id).ok_or_else(|| Error::UnknownSeries(vec![id.clone()]))?;
                let row = f.panel.row(n).to_vec();
                let drift = drift_check(f.state.stats(), &row, self.drift.config.bin_count);
                f.state.remove_series(&mut f.panel, &id)?;
                let recompute_scheduled = self.drift.admit(&drift);
                Ok(Applied::SeriesRemoved { drift, recompute_scheduled })
            }
        }
    }

    fn initialize(&mut self, event: StreamEvent) -> Result<Applied> {
        match event {
            StreamEvent::AddSeries { id, values, .. } => {
                let ts = (0..values.len()).map(|i| i as f64).collect();
                self.batch_fit(RawPanel::new(vec![id], vec![values], ts)?)?;
                Ok(Applied::Initialized)
            }
            other => Err(Error::InvalidOperation(format!(
                "engine has no data; '{}' needs an existing panel",
                other.kind()
            ))),
        }
    }

    fn enforce_retention(&mut self) -> Result<()> {
        if let (Some(w), Some(f)) = (self.config.retention_window, self.fitted.as_mut()) {
            while f.panel.n_times() > w {
                f.state.remove_time_point(&mut f.panel, 0)?;
            }
        }
        Ok(())
    }

    fn labels(&self) -> Vec<Label> {
        let Some(state) = self.state() else { return Vec::new() };
        let pts: Vec<(f64, f64)> = state.iter().map(|o| (o.mo, o.vo())).collect();
        classify(&pts, &self.config.bands)
    }

    /// Consistent MS-plot view of the visible epoch.
    pub fn snapshot(&self) -> Option<MsSnapshot> {
        let f = self.fitted.as_ref()?;
        let labels = self.labels();
        let points = f
            .panel
            .series_ids()
            .iter()
            .zip(f.state.iter())
            .zip(labels)
            .enumerate()
            .map(|(n, ((id, o), label))| MsPoint {
                id: id.clone(),
                mo: o.mo,
                vo: o.vo(),
                label,
                approximate: f.state.is_approximate(n),
            })
            .collect();
        Some(MsSnapshot { epoch: self.epoch, t_count: f.state.t_count(), points })
    }
}
