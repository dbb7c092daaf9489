//! Grounding tools: deterministic computations over the market store, plus
//! the stub table that replaces them with hard-coded benchmark answers.

mod correlation;
mod price;
mod seasonality;
mod stub;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::market::MarketError;

pub use correlation::{align_closes, correlation_between, pearson};
pub use price::{extrapolate, parkinson_percent, predict_price, predict_volatility, price, volatility};
pub use seasonality::{
    abnormal_deviations, average_shares, lowest_traded_volume, peak_traded_volume, round_the_clock_pattern, Bucketing,
    Deviations, SeasonalityLabel,
};
pub use stub::{StubEntry, StubTable};

/// Stable payload keys, one set per tool.
pub mod keys {
    pub const PRICE: &str = "price";
    pub const VOLATILITY: &str = "volatility_percent";
    pub const PREDICTED_PRICE: &str = "predicted_price";
    pub const PREDICTED_VOLATILITY: &str = "predicted_volatility_percent";
    pub const CORRELATION: &str = "correlation";
    pub const PEAK_TIMES: &str = "peak_times";
    pub const LOWEST_TIMES: &str = "lowest_times";
    pub const TIMESTAMPS: &str = "timestamps";
    pub const DEVIATIONS: &str = "deviation_percents";
    pub const EXCLUDED: &str = "excluded_buckets";
    pub const BASE_TOKENS: &str = "base_tokens";
    pub const EXCHANGES: &str = "exchanges";
    pub const QUOTE_TOKENS: &str = "quote_tokens";
    pub const TIME_UNITS: &str = "time_units";
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("no data for {key} in the requested window")]
    NoData { key: String },
    #[error("insufficient data: need at least {needed} candles, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("non-positive low price at timestamp {timestamp}")]
    NonPositiveLow { timestamp: i64 },
    #[error("series do not align: only {aligned} common timestamps in the window")]
    AlignmentFailure { aligned: usize },
    #[error("zero variance in series {side}; correlation undefined")]
    ZeroVariance { side: &'static str },
    #[error("no complete {period} period in the window")]
    NoCompletePeriod { period: String },
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("unsupported partition: granularity {granularity} within period {period}")]
    UnsupportedBucketing { period: String, granularity: String },
    #[error("granularity {granularity} is finer than the {interval}s candle interval")]
    GranularityTooFine { granularity: String, interval: i64 },
    #[error("window is missing the seasonality parameter {0}")]
    MissingPartition(&'static str),
    #[error("unknown benchmark item '{0}'")]
    UnknownItem(String),
    #[error("item {item_id} has no stub for tool {requested}; stubbed tools: [{}]", available.join(", "))]
    ToolMismatch {
        item_id: String,
        requested: String,
        available: Vec<String>,
    },
    #[error("invalid payload for {tool}: {message}")]
    InvalidPayload { tool: String, message: String },
    #[error("stub table: {0}")]
    StubTable(String),
}

/// Every tool the engine knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    PeakTradedVolume,
    LowestTradedVolume,
    RoundTheClockPattern,
    AbnormalDeviations,
    Price,
    Volatility,
    PredictPrice,
    PredictVolatility,
    CorrelationBetweenTokens,
    CorrelationBetweenExchanges,
    GetBaseTokens,
    GetExchanges,
    GetQuoteTokens,
    GetValidTimeUnits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Number,
    Labels,
    Timestamps,
    Numbers,
}

impl ToolKind {
    pub const ALL: [ToolKind; 14] = [
        ToolKind::PeakTradedVolume,
        ToolKind::LowestTradedVolume,
        ToolKind::RoundTheClockPattern,
        ToolKind::AbnormalDeviations,
        ToolKind::Price,
        ToolKind::Volatility,
        ToolKind::PredictPrice,
        ToolKind::PredictVolatility,
        ToolKind::CorrelationBetweenTokens,
        ToolKind::CorrelationBetweenExchanges,
        ToolKind::GetBaseTokens,
        ToolKind::GetExchanges,
        ToolKind::GetQuoteTokens,
        ToolKind::GetValidTimeUnits,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolKind::PeakTradedVolume => "peak_traded_volume",
            ToolKind::LowestTradedVolume => "lowest_traded_volume",
            ToolKind::RoundTheClockPattern => "round_the_clock_pattern",
            ToolKind::AbnormalDeviations => "abnormal_deviations",
            ToolKind::Price => "price",
            ToolKind::Volatility => "volatility",
            ToolKind::PredictPrice => "predict_price",
            ToolKind::PredictVolatility => "predict_volatility",
            ToolKind::CorrelationBetweenTokens => "correlation_between_tokens",
            ToolKind::CorrelationBetweenExchanges => "correlation_between_exchanges",
            ToolKind::GetBaseTokens => "get_base_tokens",
            ToolKind::GetExchanges => "get_exchanges",
            ToolKind::GetQuoteTokens => "get_quote_tokens",
            ToolKind::GetValidTimeUnits => "get_valid_time_units",
        }
    }

    /// Required payload fields. Payloads may carry extra informational keys.
    pub fn payload_fields(self) -> &'static [(&'static str, FieldKind)] {
        use FieldKind::*;
        match self {
            ToolKind::PeakTradedVolume => &[(keys::PEAK_TIMES, Labels)],
            ToolKind::LowestTradedVolume => &[(keys::LOWEST_TIMES, Labels)],
            ToolKind::RoundTheClockPattern => &[(keys::PEAK_TIMES, Labels), (keys::LOWEST_TIMES, Labels)],
            ToolKind::AbnormalDeviations => &[(keys::TIMESTAMPS, Timestamps), (keys::DEVIATIONS, Numbers)],
            ToolKind::Price => &[(keys::PRICE, Number)],
            ToolKind::Volatility => &[(keys::VOLATILITY, Number)],
            ToolKind::PredictPrice => &[(keys::PREDICTED_PRICE, Number)],
            ToolKind::PredictVolatility => &[(keys::PREDICTED_VOLATILITY, Number)],
            ToolKind::CorrelationBetweenTokens | ToolKind::CorrelationBetweenExchanges => {
                &[(keys::CORRELATION, Number)]
            }
            ToolKind::GetBaseTokens => &[(keys::BASE_TOKENS, Labels)],
            ToolKind::GetExchanges => &[(keys::EXCHANGES, Labels)],
            ToolKind::GetQuoteTokens => &[(keys::QUOTE_TOKENS, Labels)],
            ToolKind::GetValidTimeUnits => &[(keys::TIME_UNITS, Labels)],
        }
    }

    /// Checks that `payload` has this tool's shape and that its numbers are finite.
    pub fn check_payload(self, payload: &Value) -> Result<(), ToolError> {
        let bad = |message: String| ToolError::InvalidPayload {
            tool: self.as_str().to_string(),
            message,
        };
        let obj = payload
            .as_object()
            .ok_or_else(|| bad("payload must be an object".into()))?;
        for (key, kind) in self.payload_fields() {
            let v = obj.get(*key).ok_or_else(|| bad(format!("missing key {key}")))?;
            let ok = match kind {
                FieldKind::Number => v.as_f64().is_some_and(f64::is_finite),
                FieldKind::Labels => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
                FieldKind::Timestamps => v.as_array().is_some_and(|a| a.iter().all(Value::is_i64)),
                FieldKind::Numbers => v
                    .as_array()
                    .is_some_and(|a| a.iter().all(|x| x.as_f64().is_some_and(f64::is_finite))),
            };
            if !ok {
                return Err(bad(format!("key {key} has the wrong type: {v}")));
            }
        }
        if self == ToolKind::AbnormalDeviations {
            let len = |k: &str| obj[k].as_array().map_or(0, Vec::len);
            if len(keys::TIMESTAMPS) != len(keys::DEVIATIONS) {
                return Err(bad("timestamps and deviation_percents differ in length".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToolKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Structured output of one tool invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool_name: String,
    pub payload: Value,
}

impl ToolResult {
    pub fn number(kind: ToolKind, key: &str, value: f64) -> Self {
        ToolResult {
            tool_name: kind.as_str().to_string(),
            payload: json!({ key: value }),
        }
    }

    pub fn labels(kind: ToolKind, key: &str, labels: Vec<String>) -> Self {
        ToolResult {
            tool_name: kind.as_str().to_string(),
            payload: json!({ key: labels }),
        }
    }

    /// Compact JSON of the payload, as handed back to the language model.
    pub fn payload_text(&self) -> String {
        self.payload.to_string()
    }
}
