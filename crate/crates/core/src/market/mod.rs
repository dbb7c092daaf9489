//! OHLCV market data: candles, instrument keys, windowed queries and the
//! file-backed in-memory store that every grounding tool reads from.

mod csv_io;
mod store;
mod window;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{parse_candles, write_csv, GapPolicy};
pub use store::{load_manifest, Manifest, ManifestEntry, MarketStore};
pub use window::{TimeUnit, WindowSpec, SECONDS_PER_DAY, SECONDS_PER_HOUR, SECONDS_PER_MINUTE, SECONDS_PER_WEEK};

pub(crate) use window::to_datetime;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("{path}: line {line}: {message}")]
    MalformedRow { path: String, line: usize, message: String },
    #[error("{path}: row {row}: {message}")]
    InvalidCandle { path: String, row: usize, message: String },
    #[error("{path}: row {row}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { path: String, row: usize, timestamp: i64 },
    #[error("{path}: row {row}: timestamp {timestamp} is earlier than the previous row")]
    OutOfOrder { path: String, row: usize, timestamp: i64 },
    #[error("{path}: gap in series, missing timestamps {missing:?}")]
    Gap { path: String, missing: Vec<i64> },
    #[error("{path}: expected header timestamp,open,high,low,close,volume, found {found}")]
    BadHeader { path: String, found: String },
    #[error("unknown instrument {key}; known instruments: [{}]", known.join(", "))]
    UnknownInstrument { key: String, known: Vec<String> },
    #[error("instrument {0} is already registered")]
    DuplicateInstrument(String),
    #[error("invalid instrument key: {0}")]
    InvalidKey(String),
    #[error("unknown time unit '{0}'")]
    UnknownTimeUnit(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid candle interval '{0}'")]
    InvalidInterval(String),
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One OHLCV bar. `timestamp` is the bar open time in UTC epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    pub fn new(timestamp: i64, open: f64, high: f64, low: f64, close: f64, volume: f64) -> Result<Self, String> {
        let candle = Candle {
            timestamp,
            open,
            high,
            low,
            close,
            volume,
        };
        candle.check()?;
        Ok(candle)
    }

    /// Checks the OHLCV invariants, returning a description of the first violation.
    pub fn check(&self) -> Result<(), String> {
        let prices = [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ];
        for (name, v) in prices {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be a positive finite price, got {v}"));
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(format!("volume must be non-negative and finite, got {}", self.volume));
        }
        if self.low > self.high {
            return Err(format!("low {} > high {}", self.low, self.high));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} above min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        Ok(())
    }
}

/// (base, quote, exchange) triple, always stored uppercase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstrumentKey {
    pub base_token: String,
    pub quote_token: String,
    pub exchange: String,
}

impl InstrumentKey {
    pub fn new(base: &str, quote: &str, exchange: &str) -> Result<Self, MarketError> {
        let norm = |field: &str, v: &str| {
            let v = v.trim();
            if v.is_empty() {
                Err(MarketError::InvalidKey(format!("{field} is empty")))
            } else {
                Ok(v.to_ascii_uppercase())
            }
        };
        Ok(InstrumentKey {
            base_token: norm("base_token", base)?,
            quote_token: norm("quote_token", quote)?,
            exchange: norm("exchange", exchange)?,
        })
    }
}

impl fmt::Display for InstrumentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}@{}", self.base_token, self.quote_token, self.exchange)
    }
}

/// Time-ordered candles of one instrument at a fixed bar interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CandleSeries {
    pub key: InstrumentKey,
    /// Seconds per bar.
    pub candle_interval: i64,
    pub candles: Vec<Candle>,
    /// Timestamps synthesised by forward-fill; empty under the reject policy.
    pub filled: Vec<i64>,
}

impl CandleSeries {
    /// Builds a series from candles already in memory, enforcing the same
    /// ordering and spacing rules as CSV ingestion.
    pub fn from_candles(key: InstrumentKey, candle_interval: i64, candles: Vec<Candle>) -> Result<Self, MarketError> {
        let origin = key.to_string();
        if candle_interval <= 0 {
            return Err(MarketError::InvalidInterval(candle_interval.to_string()));
        }
        for (i, c) in candles.iter().enumerate() {
            c.check().map_err(|message| MarketError::InvalidCandle {
                path: origin.clone(),
                row: i + 1,
                message,
            })?;
            if i > 0 {
                let step = c.timestamp - candles[i - 1].timestamp;
                if step == 0 {
                    return Err(MarketError::DuplicateTimestamp {
                        path: origin,
                        row: i + 1,
                        timestamp: c.timestamp,
                    });
                }
                if step < 0 {
                    return Err(MarketError::OutOfOrder {
                        path: origin,
                        row: i + 1,
                        timestamp: c.timestamp,
                    });
                }
                if step != candle_interval {
                    let prev = candles[i - 1].timestamp;
                    let missing = (1..)
                        .map(|k| prev + k * candle_interval)
                        .take_while(|t| *t < c.timestamp)
                        .collect();
                    return Err(MarketError::Gap { path: origin, missing });
                }
            }
        }
        Ok(CandleSeries {
            key,
            candle_interval,
            candles,
            filled: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<i64> {
        self.candles.first().map(|c| c.timestamp)
    }

    pub fn last_timestamp(&self) -> Option<i64> {
        self.candles.last().map(|c| c.timestamp)
    }

    /// Candles with timestamps in `(as_of - lookback, as_of]`.
    pub fn window(&self, window: &WindowSpec, as_of: i64) -> &[Candle] {
        let start = window.start(as_of);
        let lo = self.candles.partition_point(|c| c.timestamp <= start);
        let hi = self.candles.partition_point(|c| c.timestamp <= as_of);
        if lo >= hi {
            &[]
        } else {
            &self.candles[lo..hi]
        }
    }
}

/// Parses a bar interval such as `1h`, `15m`, `1d`, `1w` or a plain number of seconds.
pub fn parse_interval(text: &str) -> Result<i64, MarketError> {
    let t = text.trim();
    let bad = || MarketError::InvalidInterval(text.to_string());
    if let Ok(secs) = t.parse::<i64>() {
        return if secs > 0 { Ok(secs) } else { Err(bad()) };
    }
    let split = t.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
    let (num, unit) = t.split_at(split);
    let count: i64 = if num.is_empty() {
        1
    } else {
        num.parse().map_err(|_| bad())?
    };
    let unit_secs = match unit {
        "s" => 1,
        "m" | "min" => SECONDS_PER_MINUTE,
        "h" => SECONDS_PER_HOUR,
        "d" => SECONDS_PER_DAY,
        "w" => SECONDS_PER_WEEK,
        _ => return Err(bad()),
    };
    if count <= 0 {
        return Err(bad());
    }
    Ok(count * unit_secs)
}
