//! Volume seasonality over a two-level calendar partition: buckets of
//! `granularity_unit` inside repeated periods of `period_unit` (for example
//! weekdays inside weeks, or hours inside days). All calendar maths is UTC.

use std::collections::BTreeMap;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::market::{to_datetime, Candle, TimeUnit, SECONDS_PER_DAY};

use super::ToolError;

const WEEKDAYS: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// A calendar bucket name, e.g. `Monday` or `14:00 UTC`.
pub type SeasonalityLabel = String;

/// Supported (period, granularity) partitions and their bucket sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucketing {
    period: TimeUnit,
    granularity: TimeUnit,
}

impl Bucketing {
    pub fn new(period: TimeUnit, granularity: TimeUnit) -> Result<Self, ToolError> {
        use TimeUnit::*;
        match (period, granularity) {
            (Week, Day) | (Week, Hour) | (Day, Hour) | (Day, Minute) | (Hour, Minute) | (Year, Month) => {
                Ok(Bucketing { period, granularity })
            }
            _ => Err(ToolError::UnsupportedBucketing {
                period: period.to_string(),
                granularity: granularity.to_string(),
            }),
        }
    }

    pub fn period(&self) -> TimeUnit {
        self.period
    }

    pub fn granularity(&self) -> TimeUnit {
        self.granularity
    }

    pub fn bucket_count(&self) -> usize {
        use TimeUnit::*;
        match (self.period, self.granularity) {
            (Week, Day) => 7,
            (Week, Hour) => 168,
            (Day, Hour) => 24,
            (Day, Minute) => 1440,
            (Hour, Minute) => 60,
            (Year, Month) => 12,
            _ => unreachable!("constructor admits only supported pairs"),
        }
    }

    pub fn bucket_of(&self, ts: i64) -> usize {
        use TimeUnit::*;
        let dt = to_datetime(ts);
        let weekday = dt.weekday().num_days_from_monday() as usize;
        match (self.period, self.granularity) {
            (Week, Day) => weekday,
            (Week, Hour) => weekday * 24 + dt.hour() as usize,
            (Day, Hour) => dt.hour() as usize,
            (Day, Minute) => dt.hour() as usize * 60 + dt.minute() as usize,
            (Hour, Minute) => dt.minute() as usize,
            (Year, Month) => dt.month0() as usize,
            _ => unreachable!("constructor admits only supported pairs"),
        }
    }

    pub fn label(&self, bucket: usize) -> SeasonalityLabel {
        use TimeUnit::*;
        match (self.period, self.granularity) {
            (Week, Day) => WEEKDAYS[bucket].to_string(),
            (Week, Hour) => format!("{} {:02}:00 UTC", WEEKDAYS[bucket / 24], bucket % 24),
            (Day, Hour) => format!("{bucket:02}:00 UTC"),
            (Day, Minute) => format!("{:02}:{:02} UTC", bucket / 60, bucket % 60),
            (Hour, Minute) => format!(":{bucket:02} UTC"),
            (Year, Month) => MONTHS[bucket].to_string(),
            _ => unreachable!("constructor admits only supported pairs"),
        }
    }

    pub fn labels(&self) -> Vec<SeasonalityLabel> {
        (0..self.bucket_count()).map(|b| self.label(b)).collect()
    }

    fn check_interval(&self, candle_interval: i64) -> Result<(), ToolError> {
        let gran = match self.granularity.fixed_seconds() {
            Some(secs) => secs,
            None => SECONDS_PER_DAY,
        };
        if candle_interval <= 0 || candle_interval > gran || gran % candle_interval != 0 {
            return Err(ToolError::GranularityTooFine {
                granularity: self.granularity.to_string(),
                interval: candle_interval,
            });
        }
        Ok(())
    }
}

/// Volume per bucket within one fully covered period.
#[derive(Debug, Clone)]
struct PeriodProfile {
    volume: Vec<f64>,
    bucket_start: Vec<Option<i64>>,
}

impl PeriodProfile {
    fn total(&self) -> f64 {
        self.volume.iter().sum()
    }
}

/// Splits the candles into periods and keeps those whose every bar slot is present.
fn complete_periods(
    candles: &[Candle],
    candle_interval: i64,
    bucketing: &Bucketing,
) -> Result<Vec<PeriodProfile>, ToolError> {
    bucketing.check_interval(candle_interval)?;
    let buckets = bucketing.bucket_count();
    let mut grouped: BTreeMap<i64, (usize, PeriodProfile)> = BTreeMap::new();
    for c in candles {
        let start = bucketing.period.floor(c.timestamp);
        let (count, profile) = grouped.entry(start).or_insert_with(|| {
            (
                0,
                PeriodProfile {
                    volume: vec![0.0; buckets],
                    bucket_start: vec![None; buckets],
                },
            )
        });
        let b = bucketing.bucket_of(c.timestamp);
        *count += 1;
        profile.volume[b] += c.volume;
        let slot = &mut profile.bucket_start[b];
        *slot = Some(slot.map_or(c.timestamp, |t| t.min(c.timestamp)));
    }
    let complete: Vec<PeriodProfile> = grouped
        .into_iter()
        .filter(|(start, (count, _))| {
            let span = bucketing.period.next_start(*start) - start;
            span % candle_interval == 0 && *count as i64 == span / candle_interval
        })
        .map(|(_, (_, profile))| profile)
        .collect();
    if complete.is_empty() {
        return Err(ToolError::NoCompletePeriod {
            period: bucketing.period.to_string(),
        });
    }
    Ok(complete)
}

/// Mean percentage share of each bucket in its period's total volume, over
/// complete periods with non-zero volume.
pub fn average_shares(candles: &[Candle], candle_interval: i64, bucketing: &Bucketing) -> Result<Vec<f64>, ToolError> {
    let periods = complete_periods(candles, candle_interval, bucketing)?;
    let mut sums = vec![0.0; bucketing.bucket_count()];
    let mut used = 0usize;
    for p in &periods {
        let total = p.total();
        if total <= 0.0 {
            continue;
        }
        used += 1;
        for (s, v) in sums.iter_mut().zip(&p.volume) {
            *s += 100.0 * v / total;
        }
    }
    if used == 0 {
        return Err(ToolError::NoCompletePeriod {
            period: format!("{} (with traded volume)", bucketing.period),
        });
    }
    Ok(sums.into_iter().map(|s| s / used as f64).collect())
}

fn uniform_share(bucketing: &Bucketing) -> f64 {
    100.0 / bucketing.bucket_count() as f64
}

fn select_peaks(shares: &[f64], bucketing: &Bucketing, threshold_percent: f64) -> Vec<String> {
    let cutoff = uniform_share(bucketing) * (1.0 + threshold_percent / 100.0);
    let mut hits: Vec<(usize, f64)> = shares
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, s)| *s >= cutoff)
        .collect();
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    hits.into_iter().map(|(b, _)| bucketing.label(b)).collect()
}

fn select_lows(shares: &[f64], bucketing: &Bucketing, threshold_percent: f64) -> Vec<String> {
    let cutoff = uniform_share(bucketing) * (1.0 - threshold_percent / 100.0);
    let mut hits: Vec<(usize, f64)> = shares
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, s)| *s <= cutoff)
        .collect();
    hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    hits.into_iter().map(|(b, _)| bucketing.label(b)).collect()
}

/// Buckets whose average share is at least `threshold_percent` (relative)
/// above the uniform share, most active first.
pub fn peak_traded_volume(
    candles: &[Candle],
    candle_interval: i64,
    bucketing: &Bucketing,
    threshold_percent: f64,
) -> Result<Vec<SeasonalityLabel>, ToolError> {
    let shares = average_shares(candles, candle_interval, bucketing)?;
    Ok(select_peaks(&shares, bucketing, threshold_percent))
}

/// Buckets whose average share is at least `threshold_percent` (relative)
/// below the uniform share, least active first.
pub fn lowest_traded_volume(
    candles: &[Candle],
    candle_interval: i64,
    bucketing: &Bucketing,
    threshold_percent: f64,
) -> Result<Vec<SeasonalityLabel>, ToolError> {
    let shares = average_shares(candles, candle_interval, bucketing)?;
    Ok(select_lows(&shares, bucketing, threshold_percent))
}

/// `(peak_traded_volume, lowest_traded_volume)` over the same shares.
pub fn round_the_clock_pattern(
    candles: &[Candle],
    candle_interval: i64,
    bucketing: &Bucketing,
    threshold_percent: f64,
) -> Result<(Vec<SeasonalityLabel>, Vec<SeasonalityLabel>), ToolError> {
    let shares = average_shares(candles, candle_interval, bucketing)?;
    Ok((
        select_peaks(&shares, bucketing, threshold_percent),
        select_lows(&shares, bucketing, threshold_percent),
    ))
}

/// Output of [`abnormal_deviations`]: parallel lists plus the buckets that had
/// no historical volume and therefore no defined deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviations {
    pub timestamps: Vec<i64>,
    pub deviation_percents: Vec<f64>,
    pub excluded_buckets: Vec<SeasonalityLabel>,
}

/// Compares each bucket of the most recent complete period against the mean
/// of the same bucket over all earlier complete periods.
///
/// Returns buckets with `|deviation| >= threshold_percent`, largest first.
pub fn abnormal_deviations(
    candles: &[Candle],
    candle_interval: i64,
    bucketing: &Bucketing,
    threshold_percent: f64,
) -> Result<Deviations, ToolError> {
    let periods = complete_periods(candles, candle_interval, bucketing)?;
    let Some((recent, history)) = periods.split_last() else {
        unreachable!("complete_periods never returns an empty list");
    };
    if history.is_empty() {
        return Err(ToolError::InsufficientHistory(format!(
            "need at least two complete {} periods, found 1",
            bucketing.period
        )));
    }
    let mut hits = Vec::new();
    let mut excluded = Vec::new();
    for b in 0..bucketing.bucket_count() {
        let mean = history.iter().map(|p| p.volume[b]).sum::<f64>() / history.len() as f64;
        if mean <= 0.0 {
            excluded.push(bucketing.label(b));
            continue;
        }
        let deviation = 100.0 * (recent.volume[b] - mean) / mean;
        if deviation.abs() >= threshold_percent {
            if let Some(ts) = recent.bucket_start[b] {
                hits.push((ts, deviation));
            }
        }
    }
    hits.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    let (timestamps, deviation_percents) = hits.into_iter().unzip();
    Ok(Deviations {
        timestamps,
        deviation_percents,
        excluded_buckets: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::SECONDS_PER_HOUR;

    // 2024-01-01 00:00 UTC, Monday
    const MONDAY: i64 = 1_704_067_200;

    fn daily(weeks: i64, vol: impl Fn(i64, usize) -> f64) -> Vec<Candle> {
        (0..weeks * 7)
            .map(|d| {
                let t = MONDAY + d * SECONDS_PER_DAY;
                Candle::new(t, 1.0, 1.0, 1.0, 1.0, vol(d / 7, (d % 7) as usize)).unwrap()
            })
            .collect()
    }

    fn weekdays() -> Bucketing {
        Bucketing::new(TimeUnit::Week, TimeUnit::Day).unwrap()
    }

    #[test]
    fn bucket_sets() {
        let b = weekdays();
        assert_eq!(b.labels(), WEEKDAYS.to_vec());
        assert_eq!(b.bucket_of(MONDAY + 2 * SECONDS_PER_DAY + 5), 2);
        let h = Bucketing::new(TimeUnit::Day, TimeUnit::Hour).unwrap();
        assert_eq!(h.label(7), "07:00 UTC");
        assert_eq!(h.bucket_of(MONDAY + 14 * SECONDS_PER_HOUR), 14);
        let wh = Bucketing::new(TimeUnit::Week, TimeUnit::Hour).unwrap();
        assert_eq!(wh.label(24 + 9), "Tuesday 09:00 UTC");
        let ym = Bucketing::new(TimeUnit::Year, TimeUnit::Month).unwrap();
        assert_eq!(ym.bucket_of(MONDAY + 40 * SECONDS_PER_DAY), 1);
        assert!(Bucketing::new(TimeUnit::Month, TimeUnit::Day).is_err());
    }

    #[test]
    fn uniform_volume_has_no_extremes() {
        let candles = daily(4, |_, _| 10.0);
        let b = weekdays();
        assert!(peak_traded_volume(&candles, SECONDS_PER_DAY, &b, 5.0)
            .unwrap()
            .is_empty());
        assert!(lowest_traded_volume(&candles, SECONDS_PER_DAY, &b, 5.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn planted_spikes_ordered() {
        // Monday x3, Friday x2: shares 3/10, 2/10, others 1/10
        let candles = daily(8, |_, d| match d {
            0 => 30.0,
            4 => 20.0,
            _ => 10.0,
        });
        let b = weekdays();
        assert_eq!(
            peak_traded_volume(&candles, SECONDS_PER_DAY, &b, 5.0).unwrap(),
            vec!["Monday", "Friday"]
        );
    }

    #[test]
    fn sunday_trough() {
        let candles = daily(8, |_, d| if d == 6 { 1.0 } else { 10.0 });
        let b = weekdays();
        assert_eq!(
            lowest_traded_volume(&candles, SECONDS_PER_DAY, &b, 5.0).unwrap(),
            vec!["Sunday"]
        );
    }

    #[test]
    fn partial_periods_are_ignored() {
        // start on a Wednesday: first week incomplete, then nothing complete
        let candles: Vec<Candle> = (2..9)
            .map(|d| Candle::new(MONDAY + d * SECONDS_PER_DAY, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap())
            .collect();
        assert!(matches!(
            average_shares(&candles, SECONDS_PER_DAY, &weekdays()),
            Err(ToolError::NoCompletePeriod { .. })
        ));
    }

    #[test]
    fn granularity_finer_than_bars() {
        let candles = daily(2, |_, _| 1.0);
        let b = Bucketing::new(TimeUnit::Day, TimeUnit::Hour).unwrap();
        assert!(matches!(
            average_shares(&candles, SECONDS_PER_DAY, &b),
            Err(ToolError::GranularityTooFine { .. })
        ));
    }

    #[test]
    fn doubled_last_monday() {
        let candles = daily(6, |w, d| if w == 5 && d == 0 { 200.0 } else { 100.0 });
        let b = weekdays();
        let dev = abnormal_deviations(&candles, SECONDS_PER_DAY, &b, 50.0).unwrap();
        assert_eq!(dev.timestamps, vec![MONDAY + 35 * SECONDS_PER_DAY]);
        assert!((dev.deviation_percents[0] - 100.0).abs() < 1e-9);
        let all = abnormal_deviations(&candles, SECONDS_PER_DAY, &b, 0.0).unwrap();
        assert_eq!(all.timestamps.len(), 7);
        let flat = abnormal_deviations(&daily(6, |_, _| 5.0), SECONDS_PER_DAY, &b, 5.0).unwrap();
        assert!(flat.timestamps.is_empty() && flat.deviation_percents.is_empty());
    }

    #[test]
    fn deviations_need_history_and_flag_zero_means() {
        let b = weekdays();
        assert!(matches!(
            abnormal_deviations(&daily(1, |_, _| 1.0), SECONDS_PER_DAY, &b, 5.0),
            Err(ToolError::InsufficientHistory(_))
        ));
        let candles = daily(3, |w, d| if d == 6 && w < 2 { 0.0 } else { 1.0 });
        let dev = abnormal_deviations(&candles, SECONDS_PER_DAY, &b, 5.0).unwrap();
        assert_eq!(dev.excluded_buckets, vec!["Sunday"]);
        assert!(dev.timestamps.is_empty());
    }
}
