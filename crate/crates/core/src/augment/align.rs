use chrono::{Datelike, NaiveDate};

use crate::profiler::temporal::epoch_to_datetime;
use crate::profiler::Resolution;

fn date_start(d: NaiveDate) -> i64 {
    d.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
}

/// Truncates `t` (epoch seconds) to the UTC start of its period. Weeks start
/// on Monday; quarters on January, April, July and October.
pub fn align_temporal(t: i64, r: Resolution) -> i64 {
    let floor_to = |unit: i64| t.div_euclid(unit) * unit;
    match r {
        Resolution::Second => t,
        Resolution::Minute => floor_to(60),
        Resolution::Hour => floor_to(3_600),
        Resolution::Day => floor_to(86_400),
        Resolution::Week | Resolution::Month | Resolution::Quarter | Resolution::Year => {
            let Some(dt) = epoch_to_datetime(t) else {
                return floor_to(86_400);
            };
            let d = dt.date_naive();
            let start = match r {
                Resolution::Week => {
                    d - chrono::Days::new(u64::from(d.weekday().num_days_from_monday()))
                }
                Resolution::Month => d.with_day(1).expect("day 1 exists"),
                Resolution::Quarter => {
                    NaiveDate::from_ymd_opt(d.year(), (d.month0() / 3) * 3 + 1, 1).expect("valid")
                }
                _ => NaiveDate::from_ymd_opt(d.year(), 1, 1).expect("valid"),
            };
            date_start(start)
        }
    }
}

/// Grid cell `(floor(lat / g), floor(lon / g))`; points on a cell boundary
/// belong to the cell above/right of it.
pub fn align_spatial(lat: f64, lon: f64, grid_degrees: f64) -> (i64, i64) {
    (
        align_coordinate(lat, grid_degrees),
        align_coordinate(lon, grid_degrees),
    )
}

pub fn align_coordinate(v: f64, grid_degrees: f64) -> i64 {
    (v / grid_degrees).floor() as i64
}
