//! Tick ingestion onto a regular intraday grid.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{GrstError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub price: f64,
}

/// Trading session and missing-data policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_start: NaiveTime,
    pub session_end: NaiveTime,
    pub interval_minutes: u32,
    /// Days with a larger share of unobserved grid points are dropped.
    pub max_missing_frac: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            session_start: NaiveTime::from_hms_opt(11, 0, 0).expect("valid time"),
            session_end: NaiveTime::from_hms_opt(16, 0, 0).expect("valid time"),
            interval_minutes: 5,
            max_missing_frac: 0.2,
        }
    }
}

impl SessionConfig {
    fn seconds(t: NaiveTime) -> i64 {
        i64::from(t.num_seconds_from_midnight())
    }

    fn interval_seconds(&self) -> i64 {
        i64::from(self.interval_minutes) * 60
    }

    /// Number of grid points, both session endpoints included.
    pub fn grid_len(&self) -> Result<usize> {
        if self.interval_minutes == 0 {
            return Err(GrstError::invalid("interval_minutes must be positive"));
        }
        let span = Self::seconds(self.session_end) - Self::seconds(self.session_start);
        if span <= 0 {
            return Err(GrstError::invalid(
                "session_end must be after session_start",
            ));
        }
        if !(0.0..=1.0).contains(&self.max_missing_frac) {
            return Err(GrstError::invalid("max_missing_frac must lie in [0, 1]"));
        }
        Ok((span / self.interval_seconds()) as usize + 1)
    }
}

/// One trading day sampled on the session grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayBars {
    pub date: NaiveDate,
    pub prices: Vec<f64>,
}

/// Regularised price paths, one per day, all on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    pub session_start: NaiveTime,
    pub interval_minutes: u32,
    /// Multiplier applied to calendar time after scaling (1 when unscaled).
    pub time_scale: f64,
    pub days: Vec<DayBars>,
}

impl BarSeries {
    /// Calendar minutes since the session open of grid point `m`, after time scaling.
    pub fn minutes_at(&self, m: usize) -> f64 {
        m as f64 * f64::from(self.interval_minutes) * self.time_scale
    }

    pub fn num_days(&self) -> usize {
        self.days.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub missing: usize,
    pub grid_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub bars: BarSeries,
    pub dropped: Vec<DroppedDay>,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

fn parse_time(s: &str) -> Option<NaiveTime> {
    let s = s.trim();
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .ok()
}

/// Reads `date,time,price` rows. Row numbers in errors are file line numbers.
pub fn read_ticks<R: Read>(reader: R) -> Result<Vec<Tick>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| GrstError::Ingestion {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| GrstError::Ingestion {
                row: 1,
                message: format!("missing column '{name}'"),
            })
    };
    let (ci_date, ci_time, ci_price) = (column("date")?, column("time")?, column("price")?);

    let mut ticks = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| GrstError::Ingestion {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let date = parse_date(field(ci_date)).ok_or_else(|| GrstError::Ingestion {
            row,
            message: format!("bad date '{}'", field(ci_date)),
        })?;
        let time = parse_time(field(ci_time)).ok_or_else(|| GrstError::Ingestion {
            row,
            message: format!("bad time '{}'", field(ci_time)),
        })?;
        let price: f64 = field(ci_price).parse().map_err(|_| GrstError::Ingestion {
            row,
            message: format!("bad price '{}'", field(ci_price)),
        })?;
        if !price.is_finite() {
            return Err(GrstError::Ingestion {
                row,
                message: "price is not finite".into(),
            });
        }
        ticks.push(Tick { date, time, price });
    }
    Ok(ticks)
}

/// Samples each day on the session grid by last observation carried forward.
///
/// A grid point `g` is observed when a tick falls in `(g - interval, g]`.
/// Points before the first in-session tick take that tick's price.
pub fn ingest_series(ticks: &[Tick], cfg: &SessionConfig) -> Result<Ingested> {
    let grid_len = cfg.grid_len()?;
    let start = SessionConfig::seconds(cfg.session_start);
    let end = SessionConfig::seconds(cfg.session_end);
    let step = cfg.interval_seconds();

    let mut by_day: BTreeMap<NaiveDate, Vec<(i64, f64)>> = BTreeMap::new();
    for t in ticks {
        let secs = SessionConfig::seconds(t.time);
        if (start..=end).contains(&secs) {
            by_day.entry(t.date).or_default().push((secs, t.price));
        }
    }

    let mut days = Vec::new();
    let mut dropped = Vec::new();
    for (date, mut obs) in by_day {
        // stable sort keeps file order for equal timestamps, so the last one wins
        obs.sort_by_key(|&(s, _)| s);
        let mut prices = Vec::with_capacity(grid_len);
        let mut observed = vec![false; grid_len];
        let mut cursor = 0;
        let mut last = obs[0].1;
        for (m, seen) in observed.iter_mut().enumerate() {
            let g = start + m as i64 * step;
            // ticks at or before the previous grid point were consumed there
            while cursor < obs.len() && obs[cursor].0 <= g {
                *seen = true;
                last = obs[cursor].1;
                cursor += 1;
            }
            prices.push(last);
        }
        let missing = observed.iter().filter(|&&o| !o).count();
        if missing as f64 > cfg.max_missing_frac * grid_len as f64 {
            dropped.push(DroppedDay {
                date,
                missing,
                grid_len,
            });
        } else {
            days.push(DayBars { date, prices });
        }
    }
    if days.is_empty() {
        return Err(GrstError::EmptyData(format!(
            "no trading day survived ingestion ({} dropped)",
            dropped.len()
        )));
    }
    Ok(Ingested {
        bars: BarSeries {
            session_start: cfg.session_start,
            interval_minutes: cfg.interval_minutes,
            time_scale: 1.0,
            days,
        },
        dropped,
    })
}
