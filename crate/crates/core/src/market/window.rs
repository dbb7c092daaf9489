//! Calendar units and lookback windows.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Months, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::MarketError;

pub const SECONDS_PER_MINUTE: i64 = 60;
pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 604_800;

/// Calendar unit used by lookbacks, periods and granularities.
///
/// Variants are ordered from finest to coarsest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Minute,
    Hour,
    Day,
    Week,
    Month,
    Year,
}

impl TimeUnit {
    pub const ALL: [TimeUnit; 6] = [
        TimeUnit::Minute,
        TimeUnit::Hour,
        TimeUnit::Day,
        TimeUnit::Week,
        TimeUnit::Month,
        TimeUnit::Year,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Minute => "minute",
            TimeUnit::Hour => "hour",
            TimeUnit::Day => "day",
            TimeUnit::Week => "week",
            TimeUnit::Month => "month",
            TimeUnit::Year => "year",
        }
    }

    /// Nominal length in seconds. Months count as 30 days and years as 365;
    /// only used for ordering and sanity checks, never for window arithmetic.
    pub fn nominal_seconds(self) -> i64 {
        match self {
            TimeUnit::Minute => SECONDS_PER_MINUTE,
            TimeUnit::Hour => SECONDS_PER_HOUR,
            TimeUnit::Day => SECONDS_PER_DAY,
            TimeUnit::Week => SECONDS_PER_WEEK,
            TimeUnit::Month => 30 * SECONDS_PER_DAY,
            TimeUnit::Year => 365 * SECONDS_PER_DAY,
        }
    }

    /// Fixed length in seconds, `None` for the calendar-variable units.
    pub fn fixed_seconds(self) -> Option<i64> {
        match self {
            TimeUnit::Month | TimeUnit::Year => None,
            other => Some(other.nominal_seconds()),
        }
    }

    /// Start of the calendar unit containing `ts` (UTC; weeks start Monday 00:00).
    pub fn floor(self, ts: i64) -> i64 {
        match self {
            TimeUnit::Minute | TimeUnit::Hour | TimeUnit::Day => {
                let len = self.nominal_seconds();
                ts.div_euclid(len) * len
            }
            TimeUnit::Week => {
                let days = ts.div_euclid(SECONDS_PER_DAY);
                // 1970-01-01 was a Thursday.
                let weekday = (days + 3).rem_euclid(7);
                (days - weekday) * SECONDS_PER_DAY
            }
            TimeUnit::Month => {
                let dt = to_datetime(ts);
                month_start(dt.year(), dt.month())
            }
            TimeUnit::Year => month_start(to_datetime(ts).year(), 1),
        }
    }

    /// Start of the unit following the one that begins at `start`.
    pub fn next_start(self, start: i64) -> i64 {
        match self.fixed_seconds() {
            Some(len) => start + len,
            None => {
                let dt = to_datetime(start);
                let months = if self == TimeUnit::Month { 1 } else { 12 };
                dt.checked_add_months(Months::new(months))
                    .map(|d| d.timestamp())
                    .unwrap_or(i64::MAX)
            }
        }
    }

    /// `ts` moved back by `count` units (calendar-aware for months and years).
    pub fn sub_from(self, ts: i64, count: u32) -> i64 {
        match self.fixed_seconds() {
            Some(len) => ts.saturating_sub(len.saturating_mul(count as i64)),
            None => {
                let months = if self == TimeUnit::Month {
                    count
                } else {
                    count.saturating_mul(12)
                };
                to_datetime(ts)
                    .checked_sub_months(Months::new(months))
                    .map(|d| d.timestamp())
                    .unwrap_or(i64::MIN)
            }
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeUnit {
    type Err = MarketError;

    /// Accepts singular, plural and capitalised spellings ("Days", "hours").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let singular = lower.strip_suffix('s').unwrap_or(&lower);
        match singular {
            "minute" | "min" => Ok(TimeUnit::Minute),
            "hour" | "hr" => Ok(TimeUnit::Hour),
            "day" => Ok(TimeUnit::Day),
            "week" => Ok(TimeUnit::Week),
            "month" => Ok(TimeUnit::Month),
            "year" => Ok(TimeUnit::Year),
            _ => Err(MarketError::UnknownTimeUnit(s.to_string())),
        }
    }
}

pub(crate) fn to_datetime(ts: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(ts, 0).single().unwrap_or(DateTime::<Utc>::MIN_UTC)
}

fn month_start(year: i32, month: u32) -> i64 {
    NaiveDate::from_ymd_opt(year, month, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|d| d.and_utc().timestamp())
        .unwrap_or(i64::MIN)
}

/// Lookback window plus the optional seasonality partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub time_interval: u32,
    pub time_unit: TimeUnit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_unit: Option<TimeUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity_unit: Option<TimeUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_percent: Option<f64>,
}

impl WindowSpec {
    pub fn lookback(time_interval: u32, time_unit: TimeUnit) -> Result<Self, MarketError> {
        let spec = WindowSpec {
            time_interval,
            time_unit,
            period_unit: None,
            granularity_unit: None,
            threshold_percent: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn seasonal(
        time_interval: u32,
        time_unit: TimeUnit,
        period_unit: TimeUnit,
        granularity_unit: TimeUnit,
        threshold_percent: f64,
    ) -> Result<Self, MarketError> {
        let spec = WindowSpec {
            time_interval,
            time_unit,
            period_unit: Some(period_unit),
            granularity_unit: Some(granularity_unit),
            threshold_percent: Some(threshold_percent),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.time_interval == 0 {
            return Err(MarketError::InvalidWindow("time_interval must be positive".into()));
        }
        if let Some(t) = self.threshold_percent {
            if !t.is_finite() || t < 0.0 {
                return Err(MarketError::InvalidWindow(format!(
                    "threshold_percent must be a non-negative number, got {t}"
                )));
            }
        }
        if let (Some(period), Some(gran)) = (self.period_unit, self.granularity_unit) {
            if gran >= period {
                return Err(MarketError::InvalidWindow(format!(
                    "granularity_unit {gran} must be finer than period_unit {period}"
                )));
            }
        }
        if let Some(period) = self.period_unit {
            let span = self.time_unit.nominal_seconds() * self.time_interval as i64;
            if period.nominal_seconds() > span {
                return Err(MarketError::InvalidWindow(format!(
                    "period_unit {period} is longer than the {} {} lookback",
                    self.time_interval, self.time_unit
                )));
            }
        }
        Ok(())
    }

    /// Exclusive lower bound of the window ending at `as_of`.
    pub fn start(&self, as_of: i64) -> i64 {
        self.time_unit.sub_from(as_of, self.time_interval)
    }

    /// True when `ts` lies in `(as_of - lookback, as_of]`.
    pub fn contains(&self, as_of: i64, ts: i64) -> bool {
        ts > self.start(as_of) && ts <= as_of
    }
}
