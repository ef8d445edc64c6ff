//! Streaming magnitude-shape outlyingness for panels of time series.
//!
//! * [`engine`]: exact incremental MO/VO along time, drift-gated admission of
//!   new series, background refits and MS-plot snapshots.
//! * [`fpca`]: penalized smoothing and functional PCA for drill-down on a
//!   selection of series.
//! * [`ingestion`]: CSV panels, JSON-lines events, synthetic scenarios, replay.

pub mod engine;
pub mod error;
pub mod fpca;
pub mod ingestion;

pub use engine::{Engine, EngineConfig, MsPoint, MsSnapshot, RawPanel};
pub use error::{Error, Result};
