//! Timestamp grammar and temporal resolution detection.
//!
//! Accepted cell forms (all normalized to UTC epoch seconds):
//!
//! | form                                   | example                      |
//! |----------------------------------------|------------------------------|
//! | `YYYY-MM-DD`                           | `2020-04-01`                 |
//! | `YYYY-MM-DD[T ]HH:MM[:SS[.frac]][tz]`  | `2020-04-01T13:45:00+02:00`  |
//! | `YYYY-MM`                              | `2020-04`                    |
//! | `YYYY` (column name hints time)        | `2020`                       |
//! | epoch integer (column name hints time) | `1585699200`                 |
//!
//! `tz` is `Z`, `±HH:MM` or `±HHMM`; a missing zone means UTC. Epoch integers
//! must be at least `1e8` in magnitude and are read as milliseconds from
//! `1e11` up. A column "hints time" when its name contains one of
//! [`TEMPORAL_NAME_HINTS`].

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Utc};

use super::types::Resolution;

pub const TEMPORAL_NAME_HINTS: [&str; 4] = ["time", "date", "epoch", "year"];

const EPOCH_MIN_MAGNITUDE: i64 = 100_000_000;
const EPOCH_MILLIS_FROM: i64 = 100_000_000_000;

pub fn name_hints_time(column_name: &str) -> bool {
    let lower = column_name.to_lowercase();
    TEMPORAL_NAME_HINTS.iter().any(|h| lower.contains(h))
}

/// Parses one cell under the grammar above.
pub fn parse_timestamp(cell: &str, name_hints_time: bool) -> Option<i64> {
    let s = cell.trim();
    let b = s.as_bytes();
    if b.is_empty() {
        return None;
    }
    if b.len() == 4 && b.iter().all(u8::is_ascii_digit) {
        if !name_hints_time {
            return None;
        }
        let y: i32 = s.parse().ok()?;
        return date_epoch(NaiveDate::from_ymd_opt(y, 1, 1)?);
    }
    if name_hints_time {
        if let Some(v) = parse_epoch(s) {
            return Some(v);
        }
    }
    if b.len() < 7 || !b[..4].iter().all(u8::is_ascii_digit) || b[4] != b'-' {
        return None;
    }
    if b.len() == 7 {
        let y: i32 = s[..4].parse().ok()?;
        let m: u32 = digits(&s[5..7])?;
        return date_epoch(NaiveDate::from_ymd_opt(y, m, 1)?);
    }
    if b.len() < 10 {
        return None;
    }
    let date = NaiveDate::parse_from_str(&s[..10], "%Y-%m-%d").ok()?;
    if b.len() == 10 {
        return date_epoch(date);
    }
    if b[10] != b'T' && b[10] != b' ' {
        return None;
    }
    let rest = &s[11..];
    let (time_part, offset) = split_offset(rest)?;
    let time = ["%H:%M:%S%.f", "%H:%M:%S", "%H:%M"]
        .iter()
        .find_map(|f| NaiveTime::parse_from_str(time_part, f).ok())?;
    let naive = NaiveDateTime::new(date, time);
    let dt = offset.from_local_datetime(&naive).single()?;
    Some(dt.with_timezone(&Utc).timestamp())
}

fn digits<T: std::str::FromStr>(s: &str) -> Option<T> {
    if s.bytes().all(|c| c.is_ascii_digit()) {
        s.parse().ok()
    } else {
        None
    }
}

fn parse_epoch(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let v: i64 = digits(body)?;
    if v < EPOCH_MIN_MAGNITUDE {
        return None;
    }
    let v = if neg { -v } else { v };
    Some(if v.abs() >= EPOCH_MILLIS_FROM {
        v.div_euclid(1000)
    } else {
        v
    })
}

fn split_offset(rest: &str) -> Option<(&str, FixedOffset)> {
    let utc = FixedOffset::east_opt(0)?;
    if let Some(t) = rest.strip_suffix('Z').or_else(|| rest.strip_suffix('z')) {
        return Some((t, utc));
    }
    let b = rest.as_bytes();
    for width in [6usize, 5] {
        if b.len() > width {
            let at = b.len() - width;
            let sign = b[at];
            if sign == b'+' || sign == b'-' {
                let tz = &rest[at + 1..];
                let (h, m) = if width == 6 {
                    if tz.as_bytes()[2] != b':' {
                        continue;
                    }
                    (digits::<i32>(&tz[..2])?, digits::<i32>(&tz[3..])?)
                } else {
                    (digits::<i32>(&tz[..2])?, digits::<i32>(&tz[2..])?)
                };
                let secs = (h * 3600 + m * 60) * if sign == b'-' { -1 } else { 1 };
                return Some((&rest[..at], FixedOffset::east_opt(secs)?));
            }
        }
    }
    Some((rest, utc))
}

fn date_epoch(d: NaiveDate) -> Option<i64> {
    Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp())
}

pub fn epoch_to_datetime(secs: i64) -> Option<DateTime<Utc>> {
    Utc.timestamp_opt(secs, 0).single()
}

/// Coarsest resolution whose nominal duration does not exceed the median gap
/// between consecutive distinct timestamps. Fewer than two distinct values
/// default to `Day`. Input need not be sorted.
pub fn detect_temporal_resolution(timestamps: &[i64]) -> Resolution {
    let mut distinct: Vec<i64> = timestamps.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Resolution::Day;
    }
    let mut gaps: Vec<i64> = distinct.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_unstable();
    let mid = gaps.len() / 2;
    // Median as a doubled value to stay exact for even counts.
    let median_x2 = if gaps.len() % 2 == 1 {
        2 * gaps[mid] as i128
    } else {
        gaps[mid - 1] as i128 + gaps[mid] as i128
    };
    Resolution::ALL
        .iter()
        .rev()
        .copied()
        .find(|r| median_x2 >= 2 * r.nominal_seconds() as i128)
        .unwrap_or(Resolution::Second)
}
