use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::profiler::temporal::{epoch_to_datetime, parse_timestamp};
use crate::profiler::{ColumnType, DatasetProfile, Resolution};
use crate::sketches::GeoBox;

/// Epoch seconds, encoded in JSON as an RFC 3339 UTC string. Decoding
/// accepts any form of the profiler's timestamp grammar, including bare
/// years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn parse(s: &str) -> Option<Timestamp> {
        parse_timestamp(s, true).map(Timestamp)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match epoch_to_datetime(self.0) {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%SZ")),
            None => write!(f, "{}", self.0),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Timestamp::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unrecognized timestamp '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalFilter {
    pub start: Timestamp,
    pub end: Timestamp,
    /// When set, only columns at this resolution or finer match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
}

/// Corners in `[lat, lon]` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoundingBox {
    pub fn from_geo(b: &GeoBox<f64>) -> Self {
        BoundingBox {
            min: [b.lat_min, b.lon_min],
            max: [b.lat_max, b.lon_max],
        }
    }

    pub fn to_geo(&self) -> GeoBox<f64> {
        GeoBox::new(self.min[0], self.max[0], self.min[1], self.max[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialFilter {
    Bbox(BoundingBox),
    NamedArea(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelatedMode {
    #[default]
    Join,
    Union,
    Either,
}

impl std::str::FromStr for RelatedMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "join" => Ok(RelatedMode::Join),
            "union" => Ok(RelatedMode::Union),
            "either" | "any" => Ok(RelatedMode::Either),
            other => Err(format!(
                "unknown mode '{other}' (expected join, union or either)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedQuery {
    pub profile: DatasetProfile,
    #[serde(default)]
    pub mode: RelatedMode,
}

pub const DEFAULT_PAGE_LIMIT: usize = 20;
pub const MAX_PAGE_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Page {
    pub offset: usize,
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Page {
            offset: 0,
            limit: DEFAULT_PAGE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Query {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<TemporalFilter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<SpatialFilter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_types: Option<BTreeSet<ColumnType>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related: Option<RelatedQuery>,
    #[serde(default)]
    pub page: Page,
}

impl Query {
    pub fn keywords(words: &[&str]) -> Self {
        Query {
            keywords: words.iter().map(|w| w.to_string()).collect(),
            ..Default::default()
        }
    }

    /// Keyword tokens after tokenization; empty when no usable keyword.
    pub fn keyword_tokens(&self) -> Vec<String> {
        self.keywords
            .iter()
            .flat_map(|k| crate::index::tokenize(k))
            .collect()
    }

    pub(crate) fn active_sources(&self) -> Option<&BTreeSet<String>> {
        self.sources.as_ref().filter(|s| !s.is_empty())
    }

    pub(crate) fn active_types(&self) -> Option<&BTreeSet<ColumnType>> {
        self.required_types.as_ref().filter(|s| !s.is_empty())
    }

    pub fn is_empty(&self) -> bool {
        self.keyword_tokens().is_empty()
            && self.temporal.is_none()
            && self.spatial.is_none()
            && self.active_sources().is_none()
            && self.active_types().is_none()
            && self.related.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let q: Query = serde_json::from_str(
            r#"{"keywords":["taxi"],
                "temporal":{"start":"2016","end":"2021-12-31T23:59:59Z","resolution":"day"},
                "spatial":{"bbox":{"min":[40.5,-74.3],"max":[40.9,-73.7]}},
                "sources":["socrata-mock"],
                "required_types":["temporal"],
                "page":{"offset":20}}"#,
        )
        .unwrap();
        let t = q.temporal.as_ref().unwrap();
        assert_eq!(t.start.to_string(), "2016-01-01T00:00:00Z");
        assert_eq!(t.resolution, Some(Resolution::Day));
        assert_eq!(
            q.page,
            Page {
                offset: 20,
                limit: 20
            }
        );
        let SpatialFilter::Bbox(b) = q.spatial.as_ref().unwrap() else {
            panic!()
        };
        assert_eq!(b.to_geo().lat_min, 40.5);
        let back: Query = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);

        let named: Query =
            serde_json::from_str(r#"{"spatial":{"named_area":"Manhattan"}}"#).unwrap();
        assert_eq!(
            named.spatial,
            Some(SpatialFilter::NamedArea("Manhattan".into()))
        );
    }

    #[test]
    fn emptiness() {
        assert!(Query::default().is_empty());
        assert!(Query::keywords(&["  ", "--"]).is_empty());
        assert!(!Query::keywords(&["taxi"]).is_empty());
        let q = Query {
            sources: Some(BTreeSet::new()),
            ..Default::default()
        };
        assert!(q.is_empty());
    }

    #[test]
    fn bad_timestamp_rejected() {
        let r: Result<Query, _> =
            serde_json::from_str(r#"{"temporal":{"start":"yesterday","end":"2020"}}"#);
        assert!(r.is_err());
    }
}
