//! Tool-grounded question answering over OHLCV time series.
//!
//! The crate is organised bottom-up:
//!
//! * [`market`] holds candles and the file-backed in-memory store.
//! * [`tools`] implements the quantitative grounding functions and the stub table.
//! * [`registry`] declares tool schemas and defaults, validates calls and dispatches them.
//! * [`agent`] runs the query loop against a language-model backend.
//! * [`eval`] scores agent runs on a benchmark and aggregates them into reports.

pub mod agent;
pub mod eval;
pub mod market;
pub mod registry;
pub mod tools;

pub use market::{Candle, CandleSeries, GapPolicy, InstrumentKey, MarketError, MarketStore, TimeUnit, WindowSpec};
pub use registry::{Grounding, ToolCall, ToolRegistry, ToolSchema};
pub use tools::{StubTable, ToolError, ToolKind, ToolResult};
