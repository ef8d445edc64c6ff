//! HTTP/JSON and server-sent-events front end for the fdastream engine.
//!
//! | route | purpose |
//! |---|---|
//! | `GET /msplot` | current MS-plot snapshot |
//! | `GET /series?ids=a,b&from=&to=` | raw values and pointwise mean of a selection |
//! | `POST /fpca` | smoothing + FPCA on a selection |
//! | `GET /fpca/topk?ids=..&component=&k=&mode=top\|bottom` | series ranked by FPC score |
//! | `POST /ingest` | one stream event |
//! | `POST /recompute` | request a full refit |
//! | `GET /config`, `PUT /config` | service configuration (partial updates merge) |
//! | `GET /events?since_epoch=` | push channel |
//! | `GET /layout` | sensor grid with outlier counts, when configured |

pub mod config;
pub mod error;
pub mod events;
pub mod hub;
pub mod routes;

use std::net::SocketAddr;
use std::sync::Arc;

pub use config::{PushPolicy, ServiceConfig};
pub use events::ServerEvent;
pub use hub::{Hub, HubOptions, LayoutEntry};
pub use routes::router;

/// Environment variable that overrides the listening port.
pub const PORT_ENV: &str = "FDA_STREAM_PORT";

/// Port from `FDA_STREAM_PORT` when set and valid, otherwise `flag`.
pub fn resolve_port(flag: u16) -> u16 {
    match std::env::var(PORT_ENV) {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            log::warn!("ignoring invalid {PORT_ENV}={v:?}");
            flag
        }),
        Err(_) => flag,
    }
}

/// Serve `hub` on an already bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, hub: Arc<Hub>) -> std::io::Result<()> {
    axum::serve(listener, router(hub)).await
}

/// Bind `addr` and return the listener with its actual address (port 0 picks one).
pub async fn bind(addr: SocketAddr) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}
