use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Candle, CandleSeries, InstrumentKey, MarketError};

pub const CSV_HEADER: [&str; 6] = ["timestamp", "open", "high", "low", "close", "volume"];

/// What ingestion does when consecutive bars are more than one interval apart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    Reject,
    /// Repeat the previous close as a flat zero-volume bar and record the timestamp.
    ForwardFill,
}

/// Parses a candle CSV. `origin` is only used in error messages.
///
/// Rows are numbered from 1 after the header; line numbers count the header as line 1.
pub fn parse_candles<R: Read>(
    reader: R,
    origin: &str,
    key: InstrumentKey,
    candle_interval: i64,
    policy: GapPolicy,
) -> Result<CandleSeries, MarketError> {
    if candle_interval <= 0 {
        return Err(MarketError::InvalidInterval(candle_interval.to_string()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| MarketError::MalformedRow {
        path: origin.to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    let found: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if found != CSV_HEADER {
        return Err(MarketError::BadHeader {
            path: origin.to_string(),
            found: found.join(","),
        });
    }

    let mut candles: Vec<Candle> = Vec::new();
    let mut filled = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let line = row + 1;
        let record = record.map_err(|e| MarketError::MalformedRow {
            path: origin.to_string(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(line),
            message: e.to_string(),
        })?;
        let malformed = |message: String| MarketError::MalformedRow {
            path: origin.to_string(),
            line,
            message,
        };
        if record.len() != CSV_HEADER.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                CSV_HEADER.len(),
                record.len()
            )));
        }
        let timestamp: i64 = record[0]
            .parse()
            .map_err(|_| malformed(format!("bad timestamp '{}'", &record[0])))?;
        let mut values = [0.0f64; 5];
        for (slot, (field, name)) in values
            .iter_mut()
            .zip(record.iter().skip(1).zip(CSV_HEADER.iter().skip(1)))
        {
            *slot = field.parse().map_err(|_| malformed(format!("bad {name} '{field}'")))?;
        }
        let [open, high, low, close, volume] = values;
        let candle =
            Candle::new(timestamp, open, high, low, close, volume).map_err(|message| MarketError::InvalidCandle {
                path: origin.to_string(),
                row,
                message,
            })?;

        if let Some(prev) = candles.last().copied() {
            let step = candle.timestamp - prev.timestamp;
            if step == 0 {
                return Err(MarketError::DuplicateTimestamp {
                    path: origin.to_string(),
                    row,
                    timestamp,
                });
            }
            if step < 0 {
                return Err(MarketError::OutOfOrder {
                    path: origin.to_string(),
                    row,
                    timestamp,
                });
            }
            if step != candle_interval {
                let missing: Vec<i64> = (1..)
                    .map(|k| prev.timestamp + k * candle_interval)
                    .take_while(|t| *t < candle.timestamp)
                    .collect();
                if step % candle_interval != 0 || policy == GapPolicy::Reject {
                    return Err(MarketError::Gap {
                        path: origin.to_string(),
                        missing,
                    });
                }
                for t in missing {
                    let p = prev.close;
                    candles.push(Candle {
                        timestamp: t,
                        open: p,
                        high: p,
                        low: p,
                        close: p,
                        volume: 0.0,
                    });
                    filled.push(t);
                }
            }
        }
        candles.push(candle);
    }

    Ok(CandleSeries {
        key,
        candle_interval,
        candles,
        filled,
    })
}

/// Writes the series in the ingestion format. Floats use the shortest
/// representation that parses back to the same value, so output is byte-stable.
pub fn write_csv<W: Write>(series: &CandleSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for c in &series.candles {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.timestamp, c.open, c.high, c.low, c.close, c.volume
        )?;
    }
    Ok(())
}
