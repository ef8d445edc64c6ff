//! Data sources for the engine: wide CSV panels, JSON-lines events,
//! synthetic scenarios and paced replay.

pub mod csv;
pub mod events;
pub mod replay;
pub mod synthetic;

pub use self::csv::{parse_wide_csv, read_wide_csv, write_wide_csv};
pub use events::{parse_event_jsonl, read_events, StreamEvent};
pub use replay::{column_events, panel_events, panel_prefix, replay, EventSink, LatencySummary, Rate, ReplayReport};
pub use synthetic::{generate_synthetic, two_mode_panel, Archetype, Scenario, ScenarioSpec};
