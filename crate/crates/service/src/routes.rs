use std::collections::HashSet;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::response::sse::{Event, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use fdastream_core::fpca::{run_fpca, scree, FpcaConfig, FpcaRun, InfluenceMode, ScreeEntry};
use fdastream_core::MsSnapshot;
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::config::ServiceConfig;
use crate::error::{ApiError, ApiResult};
use crate::events::ServerEvent;
use crate::hub::{Hub, IngestOutcome, LayoutCell};

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/msplot", get(get_msplot))
        .route("/series", get(get_series))
        .route("/fpca", post(post_fpca))
        .route("/fpca/topk", get(get_top_k))
        .route("/ingest", post(post_ingest))
        .route("/recompute", post(post_recompute))
        .route("/config", get(get_config).put(put_config))
        .route("/events", get(get_events))
        .route("/layout", get(get_layout))
        .with_state(hub)
}

async fn get_msplot(State(hub): State<Arc<Hub>>) -> ApiResult<Json<Arc<MsSnapshot>>> {
    hub.snapshot().map(Json).ok_or(ApiError::NoData)
}

async fn post_ingest(State(hub): State<Arc<Hub>>, body: axum::body::Bytes) -> ApiResult<Json<IngestOutcome>> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let event = fdastream_core::ingestion::parse_event_jsonl(text)?;
    Ok(Json(hub.ingest(event)?))
}

#[derive(Serialize)]
struct RecomputeReply {
    scheduled: bool,
}

async fn post_recompute(State(hub): State<Arc<Hub>>) -> ApiResult<Json<RecomputeReply>> {
    if hub.snapshot().is_none() {
        return Err(ApiError::NoData);
    }
    Ok(Json(RecomputeReply { scheduled: hub.request_recompute() }))
}

async fn get_config(State(hub): State<Arc<Hub>>) -> Json<ServiceConfig> {
    Json(hub.config())
}

async fn put_config(State(hub): State<Arc<Hub>>, Json(patch): Json<serde_json::Value>) -> ApiResult<Json<ServiceConfig>> {
    let merged = hub.config().merged(patch)?;
    hub.set_config(merged.clone())?;
    Ok(Json(merged))
}

async fn get_layout(State(hub): State<Arc<Hub>>) -> ApiResult<Json<Vec<LayoutCell>>> {
    hub.layout_cells().map(Json).ok_or(ApiError::NoData)
}

/// Comma-separated ids, deduplicated in order.
fn parse_ids(raw: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && seen.insert(s.to_string()))
        .map(String::from)
        .collect()
}

fn dedup(ids: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    ids.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

#[derive(Debug, Deserialize)]
struct SeriesQuery {
    ids: Option<String>,
    /// First time index (inclusive).
    from: Option<usize>,
    /// Last time index (exclusive).
    to: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SeriesValues {
    id: String,
    values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct SeriesReply {
    epoch: u64,
    timestamps: Vec<f64>,
    series: Vec<SeriesValues>,
    /// Pointwise mean of the selection.
    mean: Vec<f64>,
}

async fn get_series(State(hub): State<Arc<Hub>>, Query(q): Query<SeriesQuery>) -> ApiResult<Json<SeriesReply>> {
    hub.with_engine(|engine| {
        let panel = engine.panel().ok_or(ApiError::NoData)?;
        let ids = match q.ids.as_deref() {
            Some(raw) => parse_ids(raw),
            None => panel.series_ids().to_vec(),
        };
        if ids.is_empty() {
            return Err(ApiError::BadRequest("empty selection".into()));
        }
        let rows = panel.select(&ids)?;
        let t = panel.n_times();
        let to = q.to.unwrap_or(t).min(t);
        let from = q.from.unwrap_or(0).min(to);
        let series: Vec<SeriesValues> = ids
            .iter()
            .zip(&rows)
            .map(|(id, r)| SeriesValues { id: id.clone(), values: r[from..to].to_vec() })
            .collect();
        let mean = (from..to).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64).collect();
        Ok(Json(SeriesReply {
            epoch: engine.epoch(),
            timestamps: panel.timestamps()[from..to].to_vec(),
            series,
            mean,
        }))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSource {
    Lasso,
    Click,
    FpcTopK,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FpcaRequest {
    series_ids: Vec<String>,
    #[serde(default)]
    #[allow(dead_code)]
    created_from: Option<SelectionSource>,
    /// Partial override of the configured FPCA defaults.
    #[serde(default)]
    config: Option<serde_json::Value>,
}

#[derive(Debug, Serialize)]
struct SeriesScores {
    id: String,
    scores: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Perturbation {
    component: usize,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct FpcaReply {
    epoch: u64,
    series_ids: Vec<String>,
    lambda: f64,
    sample_times: Vec<f64>,
    mean_curve: Vec<f64>,
    /// Retained FPCs sampled at `sample_times`, strongest first.
    fpcs: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    scree: Vec<ScreeEntry>,
    scores: Vec<SeriesScores>,
    /// `mean ± sqrt(2 ξ) · FPC` for the first `shown_components` FPCs.
    perturbations: Vec<Perturbation>,
    shown_components: usize,
}

fn fpca_config(hub: &Hub, patch: Option<serde_json::Value>) -> ApiResult<FpcaConfig> {
    let current = hub.config();
    match patch {
        Some(patch) => Ok(current.merged(serde_json::json!({ "fpca": patch }))?.fpca),
        None => Ok(current.fpca),
    }
}

/// Copy the selected rows under the writer lock, then fit on the worker pool.
async fn fit_selection(hub: &Arc<Hub>, ids: Vec<String>, config: FpcaConfig) -> ApiResult<(u64, FpcaRun)> {
    let ids = dedup(ids);
    if ids.len() < 2 {
        return Err(fdastream_core::Error::InvalidOperation(format!(
            "FPCA needs a selection of at least 2 series, got {}",
            ids.len()
        ))
        .into());
    }
    let (epoch, rows, times) = hub.with_engine(|engine| {
        let panel = engine.panel().ok_or(ApiError::NoData)?;
        let rows: Vec<Vec<f64>> = panel.select(&ids)?.into_iter().map(<[f64]>::to_vec).collect();
        Ok::<_, ApiError>((engine.epoch(), rows, panel.timestamps().to_vec()))
    })?;
    let _permit = hub.fpca_slots.acquire().await.map_err(|e| ApiError::Internal(e.to_string()))?;
    let run = tokio::task::spawn_blocking(move || {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        run_fpca(&ids, &refs, &times, &config)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((epoch, run))
}

async fn post_fpca(State(hub): State<Arc<Hub>>, body: axum::body::Bytes) -> ApiResult<Json<FpcaReply>> {
    let req: FpcaRequest = serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    if req.series_ids.is_empty() {
        return Err(ApiError::BadRequest("series_ids must not be empty".into()));
    }
    let config = fpca_config(&hub, req.config)?;
    let shown = config.shown_components;
    let (epoch, run) = fit_selection(&hub, req.series_ids, config).await?;
    let m = &run.model;
    let fpcs = (0..m.n_components()).map(|j| m.fpc_curve(&run.basis, j)).collect::<Result<Vec<_>, _>>()?;
    let perturbations = (0..shown.min(m.n_components()))
        .map(|j| run.perturbation(j).map(|p| Perturbation { component: j, plus: p.plus_curve, minus: p.minus_curve }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(FpcaReply {
        epoch,
        series_ids: m.series_ids.clone(),
        lambda: run.lambda,
        sample_times: run.basis.sample_times.clone(),
        mean_curve: m.mean_curve(&run.basis),
        fpcs,
        eigenvalues: m.eigenvalues.clone(),
        scree: scree(m, m.n_components()),
        scores: m.series_ids.iter().zip(&m.scores).map(|(id, s)| SeriesScores { id: id.clone(), scores: s.clone() }).collect(),
        perturbations,
        shown_components: shown,
    }))
}

#[derive(Debug, Deserialize)]
struct TopKQuery {
    ids: String,
    #[serde(default)]
    component: usize,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    mode: Option<String>,
    threshold: Option<f64>,
}

fn default_k() -> usize {
    10
}

#[derive(Debug, Serialize)]
struct RankedScore {
    id: String,
    score: f64,
}

#[derive(Debug, Serialize)]
struct TopKReply {
    epoch: u64,
    component: usize,
    mode: &'static str,
    ids: Vec<String>,
    scores: Vec<RankedScore>,
}

async fn get_top_k(State(hub): State<Arc<Hub>>, Query(q): Query<TopKQuery>) -> ApiResult<Json<TopKReply>> {
    let mode = match q.mode.as_deref().unwrap_or("top") {
        "top" => InfluenceMode::Top,
        "bottom" => InfluenceMode::Bottom,
        other => return Err(ApiError::BadRequest(format!("mode must be top or bottom, got '{other}'"))),
    };
    let config = hub.config().fpca;
    let (epoch, run) = fit_selection(&hub, parse_ids(&q.ids), config).await?;
    let ranked = run.top_k(q.component, q.k, mode, q.threshold)?;
    let all = run.model.component_scores(q.component)?;
    let scores = ranked
        .iter()
        .map(|id| RankedScore { id: id.clone(), score: all.iter().find(|(s, _)| s == id).map_or(f64::NAN, |(_, v)| *v) })
        .collect();
    Ok(Json(TopKReply {
        epoch,
        component: q.component,
        mode: if mode == InfluenceMode::Top { "top" } else { "bottom" },
        ids: ranked,
        scores,
    }))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    /// Last epoch the client has seen; triggers an initial `resync`.
    since_epoch: Option<u64>,
}

enum Phase {
    Open,
    /// Lagged subscriber: resync sent, stream ends.
    Closing,
}

async fn get_events(
    State(hub): State<Arc<Hub>>,
    Query(q): Query<EventsQuery>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = hub.subscribe();
    let period = Duration::from_secs_f64(hub.config().push.heartbeat_s);
    let heartbeat = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
    let first: Vec<ServerEvent> = match (q.since_epoch, hub.snapshot()) {
        (Some(_), Some(s)) => vec![ServerEvent::Resync { snapshot: (*s).clone() }],
        _ => Vec::new(),
    };
    let head = stream::iter(first);
    let tail = stream::unfold((hub, rx, heartbeat, Phase::Open), |(hub, mut rx, mut hb, phase)| async move {
        if let Phase::Closing = phase {
            return None;
        }
        tokio::select! {
            ev = rx.recv() => match ev {
                Ok(ev) => Some((ev, (hub, rx, hb, Phase::Open))),
                Err(RecvError::Lagged(n)) => {
                    log::warn!("subscriber lagged by {n} events; sending resync and closing");
                    let snap = hub.snapshot()?;
                    Some((ServerEvent::Resync { snapshot: (*snap).clone() }, (hub, rx, hb, Phase::Closing)))
                }
                Err(RecvError::Closed) => None,
            },
            _ = hb.tick() => {
                let epoch = hub.snapshot().map_or(0, |s| s.epoch);
                Some((ServerEvent::Heartbeat { epoch }, (hub, rx, hb, Phase::Open)))
            }
        }
    });
    let events = futures::StreamExt::map(futures::StreamExt::chain(head, tail), |ev| {
        Ok(Event::default().event(ev.name()).data(serde_json::to_string(&ev).expect("events serialize")))
    });
    Sse::new(events)
}
