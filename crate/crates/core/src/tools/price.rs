//! Latest price, Parkinson volatility and their one-step extrapolations.

use std::f64::consts::LN_2;

use crate::market::{Candle, InstrumentKey, MarketStore, WindowSpec};

use super::ToolError;

/// Close of the most recent candle in `(as_of - lookback, as_of]`.
pub fn price(store: &MarketStore, key: &InstrumentKey, window: &WindowSpec, as_of: i64) -> Result<f64, ToolError> {
    store
        .query_window(key, window, as_of)?
        .last()
        .map(|c| c.close)
        .ok_or_else(|| ToolError::NoData { key: key.to_string() })
}

/// Parkinson range estimator over the given candles, in percent:
///
/// `100 * sqrt( sum(ln(high/low)^2) / (4 * n * ln 2) )`
///
/// Not annualised. Needs at least two candles.
pub fn parkinson_percent(candles: &[Candle]) -> Result<f64, ToolError> {
    let n = candles.len();
    if n < 2 {
        return Err(ToolError::InsufficientData { needed: 2, got: n });
    }
    let mut sum_sq = 0.0;
    for c in candles {
        if c.low <= 0.0 || !c.low.is_finite() {
            return Err(ToolError::NonPositiveLow { timestamp: c.timestamp });
        }
        let range = (c.high / c.low).ln();
        sum_sq += range * range;
    }
    Ok(100.0 * (sum_sq / (4.0 * n as f64 * LN_2)).sqrt())
}

pub fn volatility(store: &MarketStore, key: &InstrumentKey, window: &WindowSpec, as_of: i64) -> Result<f64, ToolError> {
    parkinson_percent(store.query_window(key, window, as_of)?)
}

/// Linear one-step extrapolation from two adjacent windows.
pub fn extrapolate(previous: f64, last: f64) -> f64 {
    last + (last - previous)
}

pub fn predict_price(
    store: &MarketStore,
    key: &InstrumentKey,
    window: &WindowSpec,
    as_of: i64,
) -> Result<f64, ToolError> {
    let last = price(store, key, window, as_of)?;
    let previous = price(store, key, window, window.start(as_of)).map_err(|e| history_error("price", e))?;
    Ok(extrapolate(previous, last))
}

/// Extrapolated volatility, clamped at zero.
pub fn predict_volatility(
    store: &MarketStore,
    key: &InstrumentKey,
    window: &WindowSpec,
    as_of: i64,
) -> Result<f64, ToolError> {
    let last = volatility(store, key, window, as_of)?;
    let previous = volatility(store, key, window, window.start(as_of)).map_err(|e| history_error("volatility", e))?;
    Ok(extrapolate(previous, last).max(0.0))
}

fn history_error(what: &str, err: ToolError) -> ToolError {
    match err {
        ToolError::NoData { .. } | ToolError::InsufficientData { .. } => ToolError::InsufficientHistory(format!(
            "the window preceding the current one has no usable {what} data"
        )),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{CandleSeries, TimeUnit, SECONDS_PER_HOUR};

    fn key() -> InstrumentKey {
        InstrumentKey::new("BTC", "USDT", "BINANCE").unwrap()
    }

    fn store_from(candles: Vec<Candle>, interval: i64) -> MarketStore {
        let mut store = MarketStore::new();
        store
            .insert(CandleSeries::from_candles(key(), interval, candles).unwrap())
            .unwrap();
        store
    }

    fn bar(t: i64, close: f64, high: f64, low: f64) -> Candle {
        Candle::new(t, close, high, low, close, 1.0).unwrap()
    }

    #[test]
    fn constant_series_price() {
        let candles = (0..48).map(|i| bar(i * 3600, 100.0, 100.0, 100.0)).collect();
        let store = store_from(candles, SECONDS_PER_HOUR);
        let w = WindowSpec::lookback(1, TimeUnit::Day).unwrap();
        assert_eq!(price(&store, &key(), &w, 47 * 3600).unwrap(), 100.0);
    }

    #[test]
    fn price_is_last_close_at_or_before_as_of() {
        let candles = (0..10)
            .map(|i| bar(i * 3600, 10.0 + i as f64, 11.0 + i as f64, 9.0 + i as f64))
            .collect();
        let store = store_from(candles, SECONDS_PER_HOUR);
        let w = WindowSpec::lookback(1, TimeUnit::Day).unwrap();
        assert_eq!(price(&store, &key(), &w, 9 * 3600).unwrap(), 19.0);
        // as_of between bars 4 and 5
        assert_eq!(price(&store, &key(), &w, 4 * 3600 + 1800).unwrap(), 14.0);
        assert!(matches!(price(&store, &key(), &w, -1), Err(ToolError::NoData { .. })));
    }

    #[test]
    fn flat_bars_have_zero_volatility() {
        let candles: Vec<Candle> = (0..5).map(|i| bar(i * 60, 7.0, 7.0, 7.0)).collect();
        assert_eq!(parkinson_percent(&candles).unwrap(), 0.0);
    }

    #[test]
    fn volatility_needs_two_bars() {
        let one = [bar(0, 7.0, 8.0, 6.0)];
        assert!(matches!(
            parkinson_percent(&one),
            Err(ToolError::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn volatility_hand_value() {
        // ln(e) = 1 for both bars: sum = 2, n = 2 -> 100 * sqrt(1 / (4 ln 2))
        let e = std::f64::consts::E;
        let candles = [bar(0, 1.5, e, 1.0), bar(60, 1.5, e, 1.0)];
        let expected = 100.0 * (1.0 / (4.0 * LN_2)).sqrt();
        assert!((parkinson_percent(&candles).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_examples() {
        assert_eq!(extrapolate(100.0, 100.0), 100.0);
        assert_eq!(extrapolate(100.0, 110.0), 120.0);
        assert!(extrapolate(10.0, 4.0) < 0.0);
    }

    #[test]
    fn predictions_over_two_windows() {
        // daily closes: day 0 -> 100, day 1 -> 110, hourly bars
        let mut candles = Vec::new();
        for h in 0..48i64 {
            let close = if h < 24 { 100.0 } else { 110.0 };
            // wide ranges on day 0, narrow on day 1 so volatility falls sharply
            let spread = if h < 24 { 0.10 } else { 0.01 };
            candles.push(bar(h * 3600, close, close * (1.0 + spread), close * (1.0 - spread)));
        }
        let store = store_from(candles, SECONDS_PER_HOUR);
        let w = WindowSpec::lookback(1, TimeUnit::Day).unwrap();
        let as_of = 47 * 3600;
        assert_eq!(predict_price(&store, &key(), &w, as_of).unwrap(), 120.0);
        // volatility extrapolates below zero and is clamped
        assert_eq!(predict_volatility(&store, &key(), &w, as_of).unwrap(), 0.0);
        // only one window of history
        assert!(matches!(
            predict_price(&store, &key(), &w, 23 * 3600),
            Err(ToolError::InsufficientHistory(_))
        ));
    }
}
