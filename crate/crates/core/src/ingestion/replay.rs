//! Paced delivery of event streams into a sink.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::StreamEvent;
use crate::engine::{Engine, RawPanel};
use crate::error::{Error, Result};

/// Delivery pacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rate {
    /// No pacing.
    Max,
    PerSecond(f64),
}

impl std::str::FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(Rate::Max);
        }
        match s.parse::<f64>() {
            Ok(r) if r > 0.0 && r.is_finite() => Ok(Rate::PerSecond(r)),
            _ => Err(Error::Config(format!("rate must be \"max\" or a positive number, got '{s}'"))),
        }
    }
}

/// Receives replayed events. Errors abort the replay.
pub trait EventSink {
    fn deliver(&mut self, event: &StreamEvent) -> Result<()>;
}

impl<F> EventSink for F
where
    F: FnMut(&StreamEvent) -> Result<()>,
{
    fn deliver(&mut self, event: &StreamEvent) -> Result<()> {
        self(event)
    }
}

/// In-process delivery: apply, then run any refit the event triggered.
impl EventSink for Engine {
    fn deliver(&mut self, event: &StreamEvent) -> Result<()> {
        self.apply(event.clone())?;
        self.run_pending_recompute()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_s: f64,
    pub p50_s: f64,
    pub p90_s: f64,
    pub p99_s: f64,
    pub max_s: f64,
}

impl LatencySummary {
    /// Nearest-rank quantiles of `samples` (seconds).
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return LatencySummary::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        LatencySummary {
            count: s.len(),
            mean_s: s.iter().sum::<f64>() / s.len() as f64,
            p50_s: q(0.50),
            p90_s: q(0.90),
            p99_s: q(0.99),
            max_s: s[s.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub delivered: usize,
    pub by_kind: std::collections::BTreeMap<String, usize>,
    pub elapsed_s: f64,
    pub latency: LatencySummary,
    /// Index and message of the event that aborted the replay.
    pub aborted: Option<(usize, String)>,
    #[serde(skip)]
    pub samples_s: Vec<f64>,
}

impl ReplayReport {
    pub fn is_complete(&self) -> bool {
        self.aborted.is_none()
    }
}

/// Deliver `events` in order; event `i` is released no earlier than `i / rate`
/// seconds after the start.
pub fn replay<I, S>(events: I, rate: Rate, sink: &mut S) -> ReplayReport
where
    I: IntoIterator<Item = StreamEvent>,
    S: EventSink + ?Sized,
{
    let start = Instant::now();
    let mut samples = Vec::new();
    let mut by_kind = std::collections::BTreeMap::new();
    let mut aborted = None;
    for (i, ev) in events.into_iter().enumerate() {
        if let Rate::PerSecond(r) = rate {
            let due = start + Duration::from_secs_f64(i as f64 / r);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let t0 = Instant::now();
        let res = sink.deliver(&ev);
        samples.push(t0.elapsed().as_secs_f64());
        if let Err(e) = res {
            aborted = Some((i, e.to_string()));
            break;
        }
        *by_kind.entry(ev.kind().to_string()).or_insert(0) += 1;
    }
    let delivered = by_kind.values().sum();
    ReplayReport {
        delivered,
        by_kind,
        elapsed_s: start.elapsed().as_secs_f64(),
        latency: LatencySummary::from_samples(&samples),
        aborted,
        samples_s: samples,
    }
}

/// `add_time_point` events for columns `from..T` of a panel.
pub fn column_events(panel: &RawPanel, from: usize) -> Vec<StreamEvent> {
    (from..panel.n_times())
        .map(|t| StreamEvent::AddTimePoint { values: panel.column(t), ts: Some(panel.timestamps()[t]) })
        .collect()
}

/// The first `t` columns of a panel.
pub fn panel_prefix(panel: &RawPanel, t: usize) -> Result<RawPanel> {
    let t = t.clamp(1, panel.n_times());
    RawPanel::new(
        panel.series_ids().to_vec(),
        panel.rows().iter().map(|r| r[..t].to_vec()).collect(),
        panel.timestamps()[..t].to_vec(),
    )
}

/// Events that rebuild `panel` from nothing: one `add_series` per series over
/// the first `warmup` columns, then the remaining columns.
pub fn panel_events(panel: &RawPanel, warmup: usize) -> Vec<StreamEvent> {
    let w = warmup.clamp(1, panel.n_times());
    let ts = panel.timestamps()[0];
    let mut out: Vec<StreamEvent> = panel
        .series_ids()
        .iter()
        .zip(panel.rows())
        .map(|(id, r)| StreamEvent::AddSeries { id: id.clone(), values: r[..w].to_vec(), ts: Some(ts) })
        .collect();
    out.extend(column_events(panel, w));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;

    fn panel() -> RawPanel {
        RawPanel::from_rows((0..4).map(|n| (0..12).map(|t| (n * t) as f64 * 0.1 + n as f64).collect()).collect()).unwrap()
    }

    #[test]
    fn max_rate_preserves_order() {
        let p = panel();
        let events = column_events(&p, 2);
        let mut seen = Vec::new();
        let mut sink = |e: &StreamEvent| {
            seen.push(e.event_time().unwrap());
            Ok(())
        };
        let rep = replay(events, Rate::Max, &mut sink);
        assert_eq!(rep.delivered, 10);
        assert_eq!(rep.by_kind["add_time_point"], 10);
        assert_eq!(seen, (2..12).map(|t| t as f64).collect::<Vec<_>>());
        assert_eq!(rep.latency.count, 10);
    }

    #[test]
    fn pacing() {
        let p = panel();
        let events: Vec<_> = column_events(&p, 0).into_iter().take(4).collect();
        let mut sink = |_: &StreamEvent| Ok(());
        let rep = replay(events, Rate::PerSecond(2.0), &mut sink);
        assert!(rep.elapsed_s >= 1.5, "{}", rep.elapsed_s);
    }

    #[test]
    fn sink_error_aborts() {
        let p = panel();
        let mut n = 0;
        let mut sink = |_: &StreamEvent| {
            n += 1;
            if n == 3 {
                Err(Error::InvalidOperation("nope".into()))
            } else {
                Ok(())
            }
        };
        let rep = replay(column_events(&p, 0), Rate::Max, &mut sink);
        assert_eq!(rep.delivered, 2);
        assert_eq!(rep.aborted.as_ref().unwrap().0, 2);
        assert!(!rep.is_complete());
    }

    #[test]
    fn engine_sink_matches_batch() {
        let p = panel();
        let mut e = Engine::with_panel(panel_prefix(&p, 3).unwrap(), EngineConfig::default()).unwrap();
        let rep = replay(column_events(&p, 3), Rate::Max, &mut e);
        assert!(rep.is_complete());
        let b = Engine::with_panel(p, EngineConfig::default()).unwrap();
        let (sa, sb) = (e.snapshot().unwrap(), b.snapshot().unwrap());
        for (a, b) in sa.points.iter().zip(&sb.points) {
            assert!((a.mo - b.mo).abs() < 1e-12 && (a.vo - b.vo).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_parsing() {
        assert_eq!("max".parse::<Rate>().unwrap(), Rate::Max);
        assert_eq!("2.5".parse::<Rate>().unwrap(), Rate::PerSecond(2.5));
        assert!("0".parse::<Rate>().is_err());
        assert!("fast".parse::<Rate>().is_err());
    }

    #[test]
    fn quantiles() {
        let l = LatencySummary::from_samples(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!((l.p50_s, l.p90_s, l.max_s, l.mean_s), (2.0, 4.0, 4.0, 2.5));
    }
}
