use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Semantic type assigned to a column by the profiler (or by a user override).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Categorical,
    Numerical,
    Temporal,
    SpatialLatitude,
    SpatialLongitude,
}

impl ColumnType {
    pub const ALL: [ColumnType; 5] = [
        ColumnType::Categorical,
        ColumnType::Numerical,
        ColumnType::Temporal,
        ColumnType::SpatialLatitude,
        ColumnType::SpatialLongitude,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Categorical => "categorical",
            ColumnType::Numerical => "numerical",
            ColumnType::Temporal => "temporal",
            ColumnType::SpatialLatitude => "spatial_latitude",
            ColumnType::SpatialLongitude => "spatial_longitude",
        }
    }

    /// Types that carry `numeric_stats`.
    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            ColumnType::Numerical | ColumnType::SpatialLatitude | ColumnType::SpatialLongitude
        )
    }

    pub fn is_spatial(self) -> bool {
        matches!(
            self,
            ColumnType::SpatialLatitude | ColumnType::SpatialLongitude
        )
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} '{value}'")]
pub struct ParseEnumError {
    kind: &'static str,
    value: String,
}

impl FromStr for ColumnType {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.trim().to_ascii_lowercase();
        match folded.as_str() {
            "categorical" | "text" => Ok(ColumnType::Categorical),
            "numerical" | "numeric" | "number" => Ok(ColumnType::Numerical),
            "temporal" | "datetime" | "date" => Ok(ColumnType::Temporal),
            "spatial_latitude" | "latitude" | "lat" => Ok(ColumnType::SpatialLatitude),
            "spatial_longitude" | "longitude" | "lon" => Ok(ColumnType::SpatialLongitude),
            _ => Err(ParseEnumError {
                kind: "column type",
                value: s.to_string(),
            }),
        }
    }
}

/// Temporal granularity, ordered from finest to coarsest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Second,
    Minute,
    Hour,
    Day,
    Week,
    Month,
    Quarter,
    Year,
}

impl Resolution {
    pub const ALL: [Resolution; 8] = [
        Resolution::Second,
        Resolution::Minute,
        Resolution::Hour,
        Resolution::Day,
        Resolution::Week,
        Resolution::Month,
        Resolution::Quarter,
        Resolution::Year,
    ];

    /// Minimum typical gap, in seconds, for a column to be considered at this
    /// resolution.
    pub fn nominal_seconds(self) -> i64 {
        const DAY: i64 = 86_400;
        match self {
            Resolution::Second => 1,
            Resolution::Minute => 60,
            Resolution::Hour => 3_600,
            Resolution::Day => DAY,
            Resolution::Week => 7 * DAY,
            Resolution::Month => 28 * DAY,
            Resolution::Quarter => 84 * DAY,
            Resolution::Year => 350 * DAY,
        }
    }

    /// Next coarser resolution; `Year` is a fixed point.
    pub fn coarsen(self) -> Resolution {
        let i = Self::ALL.iter().position(|r| *r == self).unwrap_or(0);
        Self::ALL[(i + 1).min(Self::ALL.len() - 1)]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Second => "second",
            Resolution::Minute => "minute",
            Resolution::Hour => "hour",
            Resolution::Day => "day",
            Resolution::Week => "week",
            Resolution::Month => "month",
            Resolution::Quarter => "quarter",
            Resolution::Year => "year",
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Resolution {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == folded)
            .ok_or(ParseEnumError {
                kind: "resolution",
                value: s.to_string(),
            })
    }
}
