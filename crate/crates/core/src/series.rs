//! Timestamps, aggregation granularity, and attribute series.

use std::fmt;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit a series is aggregated to. Equality of timestamps is defined after
/// truncation to this unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Day,
    Hour,
    Week,
}

impl Granularity {
    /// Truncate a UTC date-time to the start of its period.
    pub fn truncate(self, dt: NaiveDateTime) -> NaiveDateTime {
        match self {
            Granularity::Day => dt.date().and_time(NaiveTime::MIN),
            Granularity::Hour => dt
                .date()
                .and_hms_opt(dt.time().hour(), 0, 0)
                .expect("hour is valid"),
            Granularity::Week => {
                let days_from_monday = dt.date().weekday().num_days_from_monday() as i64;
                (dt.date() - Duration::days(days_from_monday)).and_time(NaiveTime::MIN)
            }
        }
    }

    /// Length of one period, used when lingering effects decay with the
    /// calendar gap between observations.
    pub fn period(self) -> Duration {
        match self {
            Granularity::Day => Duration::days(1),
            Granularity::Hour => Duration::hours(1),
            Granularity::Week => Duration::weeks(1),
        }
    }
}

/// A calendar instant normalized to UTC and truncated to the configured
/// granularity. Total order; equality holds only after truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Timestamp(NaiveDateTime);

#[derive(Debug, Error)]
#[error("unparseable timestamp {0:?}")]
pub struct TimestampParseError(pub String);

impl Timestamp {
    pub fn new(dt: NaiveDateTime, granularity: Granularity) -> Self {
        Timestamp(granularity.truncate(dt))
    }

    /// Convenience for daily data and tests.
    pub fn from_date(year: i32, month: u32, day: u32) -> Self {
        Timestamp(
            NaiveDate::from_ymd_opt(year, month, day)
                .expect("valid date")
                .and_time(NaiveTime::MIN),
        )
    }

    pub fn as_datetime(&self) -> NaiveDateTime {
        self.0
    }

    /// The timestamp `periods` whole periods later (or earlier, when
    /// negative).
    pub fn offset(&self, periods: i64, granularity: Granularity) -> Timestamp {
        Timestamp(self.0 + granularity.period() * periods as i32)
    }

    /// Whole periods between `earlier` and `self` at the given granularity.
    pub fn periods_since(&self, earlier: &Timestamp, granularity: Granularity) -> i64 {
        let span = self.0 - earlier.0;
        match granularity {
            Granularity::Day => span.num_days(),
            Granularity::Hour => span.num_hours(),
            Granularity::Week => span.num_weeks(),
        }
    }

    /// Parse a serialized timestamp: either `YYYY-MM-DD` or
    /// `YYYY-MM-DDTHH:MM:SS`. No further truncation is applied.
    pub fn parse(s: &str) -> Result<Self, TimestampParseError> {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
            return Ok(Timestamp(dt));
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Timestamp(d.and_time(NaiveTime::MIN)));
        }
        Err(TimestampParseError(s.to_string()))
    }

    /// Parse a raw input field with an explicit format. Formats carrying a
    /// timezone offset are converted to UTC before truncation.
    pub fn parse_with_format(
        s: &str,
        format: &str,
        granularity: Granularity,
    ) -> Result<Self, TimestampParseError> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_str(s, format) {
            return Ok(Timestamp::new(dt.naive_utc(), granularity));
        }
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, format) {
            return Ok(Timestamp::new(dt, granularity));
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, format) {
            return Ok(Timestamp::new(d.and_time(NaiveTime::MIN), granularity));
        }
        Err(TimestampParseError(s.to_string()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.time() == NaiveTime::MIN {
            write!(f, "{}", self.0.format("%Y-%m-%d"))
        } else {
            write!(f, "{}", self.0.format("%Y-%m-%dT%H:%M:%S"))
        }
    }
}

impl From<Timestamp> for String {
    fn from(t: Timestamp) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for Timestamp {
    type Error = TimestampParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Timestamp::parse(&s)
    }
}

/// A named, timestamp-ordered numeric series. Immutable after construction:
/// timestamps strictly increase, values are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSeries {
    id: String,
    points: Vec<(Timestamp, f64)>,
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series {id}: timestamps must be strictly increasing (at index {index})")]
    UnorderedTimestamps { id: String, index: usize },
    #[error("series {id}: non-finite value {value} at {timestamp}")]
    NonFiniteValue {
        id: String,
        timestamp: Timestamp,
        value: f64,
    },
}

impl AttributeSeries {
    pub fn new(id: impl Into<String>, points: Vec<(Timestamp, f64)>) -> Result<Self, SeriesError> {
        let id = id.into();
        for (i, (ts, v)) in points.iter().enumerate() {
            if !v.is_finite() {
                return Err(SeriesError::NonFiniteValue {
                    id,
                    timestamp: *ts,
                    value: *v,
                });
            }
            if i > 0 && points[i - 1].0 >= *ts {
                return Err(SeriesError::UnorderedTimestamps { id, index: i });
            }
        }
        Ok(AttributeSeries { id, points })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[(Timestamp, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<Timestamp> {
        self.points.first().map(|(t, _)| *t)
    }

    pub fn last_timestamp(&self) -> Option<Timestamp> {
        self.points.last().map(|(t, _)| *t)
    }
}
