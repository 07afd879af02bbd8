use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::detect::{detect_column_type, is_null, parse_as, ParsedValues};
use super::stats::NumericStats;
use super::table::{TableData, TableError};
use super::temporal::detect_temporal_resolution;
use super::types::{ColumnType, Resolution};
use super::ProfilerConfig;
use crate::ingest::ProvenanceRecord;
use crate::sketches::{
    CategoricalSketch, ColumnSummary, RangeSummary, SketchError, SpatialSummary, TemporalSummary,
};

pub const PROFILE_VERSION: u32 = 1;

const EXACT_DISTINCT_LIMIT: usize = crate::sketches::minhash::EXACT_DISTINCT_LIMIT;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopValue {
    pub value: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub detected_type: ColumnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_type_override: Option<ColumnType>,
    pub null_fraction: f64,
    pub distinct_count_estimate: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_stats: Option<NumericStats<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_resolution: Option<Resolution>,
    pub top_values: Vec<TopValue>,
    pub summary: ColumnSummary,
}

impl ColumnProfile {
    /// The user's override when present, otherwise the detected type.
    pub fn effective_type(&self) -> ColumnType {
        self.user_type_override.unwrap_or(self.detected_type)
    }
}

/// A latitude/longitude column pair and its box summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialCoverage {
    pub latitude: String,
    pub longitude: String,
    pub summary: SpatialSummary<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub profile_version: u32,
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub source: String,
    pub columns: Vec<ColumnProfile>,
    pub row_count: usize,
    pub sample: Vec<Vec<String>>,
    #[serde(default)]
    pub spatial_coverage: Vec<SpatialCoverage>,
    pub provenance: ProvenanceRecord,
    #[serde(default)]
    pub custom_metadata: BTreeMap<String, String>,
}

impl DatasetProfile {
    pub fn column(&self, name: &str) -> Option<&ColumnProfile> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn has_type(&self, ty: ColumnType) -> bool {
        self.columns.iter().any(|c| c.effective_type() == ty)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serializes")
    }
}

/// Descriptive fields supplied alongside the table.
#[derive(Debug, Clone, Default)]
pub struct DatasetMeta {
    pub name: String,
    pub description: String,
    pub source: String,
    /// Origin of the bytes; when absent an inline record is derived from the
    /// table content.
    pub provenance: Option<ProvenanceRecord>,
    pub custom_metadata: BTreeMap<String, String>,
}

impl DatasetMeta {
    pub fn named(name: &str, source: &str) -> Self {
        DatasetMeta {
            name: name.to_string(),
            source: source.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("type override names unknown column '{0}'")]
    UnknownOverrideColumn(String),
    #[error("no value in column '{column}' parses as {ty}")]
    OverrideUnparseable { column: String, ty: ColumnType },
    #[error("spatial override on '{0}' has no matching latitude/longitude partner")]
    UnpairedSpatialOverride(String),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

impl ProfileError {
    pub fn code(&self) -> &'static str {
        match self {
            ProfileError::Table(e) => e.code(),
            ProfileError::UnknownOverrideColumn(_) => "UnknownOverrideColumn",
            ProfileError::OverrideUnparseable { .. } => "OverrideUnparseable",
            ProfileError::UnpairedSpatialOverride(_) => "UnpairedSpatialOverride",
            ProfileError::Sketch(_) => "SketchError",
        }
    }
}

pub fn profile_table(
    table: &TableData,
    config: &ProfilerConfig,
    meta: DatasetMeta,
) -> Result<DatasetProfile, ProfileError> {
    profile_table_with_overrides(table, config, meta, &BTreeMap::new())
}

/// Profiles the table, forcing the given column types. Summaries of
/// overridden columns are built under the forced type.
pub fn profile_table_with_overrides(
    table: &TableData,
    config: &ProfilerConfig,
    meta: DatasetMeta,
    overrides: &BTreeMap<String, ColumnType>,
) -> Result<DatasetProfile, ProfileError> {
    if table.columns().is_empty() || table.row_count() == 0 {
        return Err(TableError::EmptyTable.into());
    }
    for name in overrides.keys() {
        if table.column(name).is_none() {
            return Err(ProfileError::UnknownOverrideColumn(name.clone()));
        }
    }

    let mut columns = Vec::with_capacity(table.columns().len());
    let mut parsed_columns = Vec::with_capacity(table.columns().len());
    for col in table.columns() {
        let detected = detect_column_type(&col.values, &col.name, config);
        let user = overrides.get(&col.name).copied();
        let (ty, parsed) = match user {
            Some(ty) if ty != detected.column_type => {
                let parsed = parse_as(&col.values, &col.name, ty, config);
                if !has_any(&parsed) {
                    return Err(ProfileError::OverrideUnparseable {
                        column: col.name.clone(),
                        ty,
                    });
                }
                (ty, parsed)
            }
            _ => (detected.column_type, detected.parsed),
        };
        let profile = build_column(
            &col.name,
            &col.values,
            ty,
            &parsed,
            detected.null_fraction,
            config,
        )?;
        columns.push(ColumnProfile {
            detected_type: detected.column_type,
            user_type_override: user,
            ..profile
        });
        parsed_columns.push(parsed);
    }

    let mut pairs = detect_spatial_pairs(&columns);
    for (lat, lon) in &pairs {
        for c in columns.iter_mut() {
            if &c.name == lat {
                c.detected_type = ColumnType::SpatialLatitude;
            } else if &c.name == lon {
                c.detected_type = ColumnType::SpatialLongitude;
            }
        }
    }
    pairs.extend(override_pairs(&columns)?);

    let index_of: HashMap<&str, usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let mut spatial_coverage = Vec::new();
    for (lat, lon) in pairs {
        let (ParsedValues::Numbers(lats), ParsedValues::Numbers(lons)) = (
            &parsed_columns[index_of[lat.as_str()]],
            &parsed_columns[index_of[lon.as_str()]],
        ) else {
            continue;
        };
        let points: Vec<(f64, f64)> = lats
            .iter()
            .zip(lons)
            .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
            .filter(|(a, b)| a.abs() <= 90.0 && b.abs() <= 180.0)
            .collect();
        if points.is_empty() {
            continue;
        }
        spatial_coverage.push(SpatialCoverage {
            latitude: lat,
            longitude: lon,
            summary: SpatialSummary::build(&points, config.summary_k)?,
        });
    }

    let provenance = meta
        .provenance
        .unwrap_or_else(|| ProvenanceRecord::for_bytes("inline", "", &table.to_csv_bytes()));
    let sample_len = config.sample_rows.min(table.row_count());
    Ok(DatasetProfile {
        profile_version: PROFILE_VERSION,
        id: dataset_id(&provenance.content_hash),
        name: meta.name,
        description: meta.description,
        source: meta.source,
        columns,
        row_count: table.row_count(),
        sample: (0..sample_len).map(|i| table.row(i)).collect(),
        spatial_coverage,
        provenance,
        custom_metadata: meta.custom_metadata,
    })
}

/// Dataset ids are derived from the content hash so that re-profiling the
/// same bytes yields the same id.
pub fn dataset_id(content_hash: &str) -> String {
    format!("ds-{}", &content_hash[..content_hash.len().min(16)])
}

fn has_any(parsed: &ParsedValues) -> bool {
    match parsed {
        ParsedValues::Numbers(v) => v.iter().any(Option::is_some),
        ParsedValues::Timestamps(v) => v.iter().any(Option::is_some),
        ParsedValues::Text(v) => v.iter().any(Option::is_some),
    }
}

fn build_column(
    name: &str,
    raw: &[String],
    ty: ColumnType,
    parsed: &ParsedValues,
    null_fraction: f64,
    config: &ProfilerConfig,
) -> Result<ColumnProfile, ProfileError> {
    let non_null: Vec<&str> = raw
        .iter()
        .filter(|v| !is_null(v, config))
        .map(|v| v.trim())
        .collect();

    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut overflow = false;
    for v in &non_null {
        if overflow {
            break;
        }
        *counts.entry(v).or_insert(0) += 1;
        overflow = counts.len() > EXACT_DISTINCT_LIMIT;
    }
    let distinct_count_estimate = if overflow {
        CategoricalSketch::from_values(non_null.iter(), config.permutations).cardinality
    } else {
        counts.len() as u64
    };
    let mut top: Vec<TopValue> = counts
        .iter()
        .map(|(v, c)| TopValue {
            value: v.to_string(),
            count: *c,
        })
        .collect();
    top.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    top.truncate(config.top_values);

    let mut numeric_stats = None;
    let mut temporal_resolution = None;
    let summary = match (ty, parsed) {
        (ColumnType::Temporal, ParsedValues::Timestamps(ts)) => {
            let ts: Vec<i64> = ts.iter().flatten().copied().collect();
            let resolution = detect_temporal_resolution(&ts);
            temporal_resolution = Some(resolution);
            ColumnSummary::Temporal(TemporalSummary::build(&ts, config.summary_k, resolution)?)
        }
        (t, ParsedValues::Numbers(nums)) if t.is_numeric() => {
            let nums: Vec<f64> = nums.iter().flatten().copied().collect();
            numeric_stats = NumericStats::from_values(nums.iter().copied());
            ColumnSummary::Numeric(RangeSummary::build(&nums, config.summary_k)?)
        }
        _ => ColumnSummary::Categorical(CategoricalSketch::from_values(
            non_null.iter(),
            config.permutations,
        )),
    };

    Ok(ColumnProfile {
        name: name.to_string(),
        detected_type: ty,
        user_type_override: None,
        null_fraction,
        distinct_count_estimate,
        numeric_stats,
        temporal_resolution,
        top_values: top,
        summary,
    })
}

const LAT_TOKENS: [&str; 2] = ["lat", "latitude"];
const LON_TOKENS: [&str; 4] = ["lon", "lng", "long", "longitude"];

/// Splits a column name into lowercase words on non-alphanumerics and
/// camel-case boundaries: `pickupLatitude` -> `pickup`, `latitude`.
fn name_tokens(name: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for ch in name.chars() {
        if !ch.is_alphanumeric() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if ch.is_uppercase() && prev_lower && !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
        prev_lower = ch.is_lowercase() || ch.is_ascii_digit();
        cur.extend(ch.to_lowercase());
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn has_token(name: &str, set: &[&str]) -> bool {
    name_tokens(name).iter().any(|t| set.contains(&t.as_str()))
}

fn within(c: &ColumnProfile, limit: f64) -> bool {
    c.numeric_stats
        .map(|s| s.min >= -limit && s.max <= limit)
        .unwrap_or(false)
}

/// Greedy left-to-right pairing of numeric latitude-named columns with the
/// first unpaired longitude-named column whose values fit the valid range.
/// Columns with a user override are not considered.
pub fn detect_spatial_pairs(columns: &[ColumnProfile]) -> Vec<(String, String)> {
    let eligible = |c: &ColumnProfile| {
        c.user_type_override.is_none() && c.detected_type == ColumnType::Numerical
    };
    let is_lat =
        |c: &ColumnProfile| eligible(c) && has_token(&c.name, &LAT_TOKENS) && within(c, 90.0);
    let is_lon = |c: &ColumnProfile| {
        eligible(c)
            && !has_token(&c.name, &LAT_TOKENS)
            && has_token(&c.name, &LON_TOKENS)
            && within(c, 180.0)
    };
    let mut used: HashSet<usize> = HashSet::new();
    let mut pairs = Vec::new();
    for (i, a) in columns.iter().enumerate() {
        if used.contains(&i) || !is_lat(a) {
            continue;
        }
        if let Some(j) =
            (0..columns.len()).find(|&j| j != i && !used.contains(&j) && is_lon(&columns[j]))
        {
            used.insert(i);
            used.insert(j);
            pairs.push((a.name.clone(), columns[j].name.clone()));
        }
    }
    pairs
}

fn override_pairs(columns: &[ColumnProfile]) -> Result<Vec<(String, String)>, ProfileError> {
    let lats: Vec<&ColumnProfile> = columns
        .iter()
        .filter(|c| c.user_type_override == Some(ColumnType::SpatialLatitude))
        .collect();
    let lons: Vec<&ColumnProfile> = columns
        .iter()
        .filter(|c| c.user_type_override == Some(ColumnType::SpatialLongitude))
        .collect();
    if lats.len() != lons.len() {
        let extra = if lats.len() > lons.len() {
            lats[lons.len()]
        } else {
            lons[lats.len()]
        };
        return Err(ProfileError::UnpairedSpatialOverride(extra.name.clone()));
    }
    Ok(lats
        .iter()
        .zip(&lons)
        .map(|(a, b)| (a.name.clone(), b.name.clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ProfilerConfig {
        ProfilerConfig::default()
    }

    #[test]
    fn date_and_trips() {
        let t = TableData::from_pairs(vec![
            ("date", vec!["2020-04-01", "2020-04-02"]),
            ("trips", vec!["120", "340"]),
        ])
        .unwrap();
        let p = profile_table(&t, &cfg(), DatasetMeta::named("bikes", "test")).unwrap();
        assert_eq!(p.columns[0].detected_type, ColumnType::Temporal);
        assert_eq!(p.columns[0].temporal_resolution, Some(Resolution::Day));
        assert_eq!(p.columns[1].detected_type, ColumnType::Numerical);
        assert_eq!(p.columns[1].numeric_stats.unwrap().mean, 230.0);
        assert_eq!(p.sample.len(), 2);
        assert_eq!(p.profile_version, PROFILE_VERSION);
    }

    #[test]
    fn single_cell() {
        let t = TableData::from_pairs(vec![("x", vec!["abc"])]).unwrap();
        let p = profile_table(&t, &cfg(), DatasetMeta::default()).unwrap();
        let c = &p.columns[0];
        assert_eq!(c.detected_type, ColumnType::Categorical);
        assert_eq!(c.distinct_count_estimate, 1);
        assert_eq!(c.null_fraction, 0.0);
        assert!(c.numeric_stats.is_none());
        assert!(c.temporal_resolution.is_none());
    }

    #[test]
    fn empty_table_is_rejected() {
        let t = TableData::new(vec![]).unwrap();
        assert!(matches!(
            profile_table(&t, &cfg(), DatasetMeta::default()),
            Err(ProfileError::Table(TableError::EmptyTable))
        ));
    }

    #[test]
    fn latitude_longitude_fixture() {
        let n = 1000;
        let lat: Vec<String> = (0..n)
            .map(|i| format!("{:.5}", 40.5 + 0.4 * i as f64 / n as f64))
            .collect();
        let lon: Vec<String> = (0..n)
            .map(|i| format!("{:.5}", -74.25 + 0.55 * ((i * 7) % n) as f64 / n as f64))
            .collect();
        let val: Vec<String> = (0..n).map(|i| (i % 17).to_string()).collect();
        let t = TableData::new(vec![
            super::super::Column {
                name: "latitude".into(),
                values: lat,
            },
            super::super::Column {
                name: "longitude".into(),
                values: lon,
            },
            super::super::Column {
                name: "value".into(),
                values: val,
            },
        ])
        .unwrap();
        let p = profile_table(&t, &cfg(), DatasetMeta::default()).unwrap();
        let pairs: Vec<_> = p
            .spatial_coverage
            .iter()
            .map(|s| (s.latitude.as_str(), s.longitude.as_str()))
            .collect();
        assert_eq!(pairs, [("latitude", "longitude")]);
        assert_eq!(p.columns[0].detected_type, ColumnType::SpatialLatitude);
        assert_eq!(p.columns[1].detected_type, ColumnType::SpatialLongitude);
        assert_eq!(p.columns[2].detected_type, ColumnType::Numerical);
        assert!(p.columns[0].numeric_stats.is_some());
        let cov = &p.spatial_coverage[0].summary;
        assert_eq!(cov.total_count, n as u64);
        assert_eq!(p.sample.len(), 20);
    }

    #[test]
    fn out_of_range_latitude_is_not_paired() {
        let t = TableData::from_pairs(vec![
            ("lat", vec!["10.0", "95.0"]),
            ("lon", vec!["10.0", "20.0"]),
        ])
        .unwrap();
        let p = profile_table(&t, &cfg(), DatasetMeta::default()).unwrap();
        assert!(p.spatial_coverage.is_empty());
        assert_eq!(p.columns[0].detected_type, ColumnType::Numerical);
    }

    #[test]
    fn pickup_dropoff_pairs_in_order() {
        let t = TableData::from_pairs(vec![
            ("pickup_lat", vec!["40.7"]),
            ("pickup_lon", vec!["-74.0"]),
            ("dropoff_lat", vec!["40.8"]),
            ("dropoff_lon", vec!["-73.9"]),
        ])
        .unwrap();
        let p = profile_table(&t, &cfg(), DatasetMeta::default()).unwrap();
        let pairs = detect_spatial_pairs(
            &p.columns
                .iter()
                .map(|c| ColumnProfile {
                    detected_type: ColumnType::Numerical,
                    ..c.clone()
                })
                .collect::<Vec<_>>(),
        );
        assert_eq!(
            pairs,
            vec![
                ("pickup_lat".to_string(), "pickup_lon".to_string()),
                ("dropoff_lat".to_string(), "dropoff_lon".to_string())
            ]
        );
        assert_eq!(p.spatial_coverage.len(), 2);
    }

    #[test]
    fn population_is_not_latitude() {
        assert!(!has_token("population", &LAT_TOKENS));
        assert!(has_token("decimalLatitude", &LAT_TOKENS));
        assert!(has_token("Start Lng", &LON_TOKENS));
    }

    #[test]
    fn override_rebuilds_summary() {
        let t = TableData::from_pairs(vec![("when", vec!["2020", "2021", "2022"])]).unwrap();
        let p = profile_table(&t, &cfg(), DatasetMeta::default()).unwrap();
        assert_eq!(p.columns[0].detected_type, ColumnType::Numerical);
        let mut o = BTreeMap::new();
        o.insert("when".to_string(), ColumnType::Temporal);
        let p = profile_table_with_overrides(&t, &cfg(), DatasetMeta::default(), &o).unwrap();
        let c = &p.columns[0];
        assert_eq!(c.user_type_override, Some(ColumnType::Temporal));
        assert_eq!(c.effective_type(), ColumnType::Temporal);
        assert_eq!(c.temporal_resolution, Some(Resolution::Year));
        assert!(matches!(c.summary, ColumnSummary::Temporal(_)));
        assert!(c.numeric_stats.is_none());
    }

    #[test]
    fn override_errors() {
        let t =
            TableData::from_pairs(vec![("c", vec!["red", "blue"]), ("d", vec!["1", "2"])]).unwrap();
        let mut o = BTreeMap::new();
        o.insert("c".to_string(), ColumnType::Numerical);
        assert!(matches!(
            profile_table_with_overrides(&t, &cfg(), DatasetMeta::default(), &o),
            Err(ProfileError::OverrideUnparseable { .. })
        ));
        let mut o = BTreeMap::new();
        o.insert("zzz".to_string(), ColumnType::Numerical);
        assert!(matches!(
            profile_table_with_overrides(&t, &cfg(), DatasetMeta::default(), &o),
            Err(ProfileError::UnknownOverrideColumn(_))
        ));
        let mut o = BTreeMap::new();
        o.insert("d".to_string(), ColumnType::SpatialLatitude);
        assert!(matches!(
            profile_table_with_overrides(&t, &cfg(), DatasetMeta::default(), &o),
            Err(ProfileError::UnpairedSpatialOverride(_))
        ));
    }

    #[test]
    fn deterministic_and_content_addressed() {
        let t = TableData::from_pairs(vec![("k", vec!["a", "b", "c"]), ("v", vec!["1", "2", "3"])])
            .unwrap();
        let a = profile_table(&t, &cfg(), DatasetMeta::named("x", "s")).unwrap();
        let b = profile_table(&t, &cfg(), DatasetMeta::named("x", "s")).unwrap();
        assert_eq!(a.id, b.id);
        assert_eq!(a.columns, b.columns);
        let json = a.to_json();
        let back: DatasetProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.columns, a.columns);
        assert!(json.contains("\"profile_version\":1"));
    }

    #[test]
    fn top_values_and_nulls() {
        let t =
            TableData::from_pairs(vec![("c", vec!["x", "y", "x", "", "NULL", "z", "x"])]).unwrap();
        let p = profile_table(&t, &cfg(), DatasetMeta::default()).unwrap();
        let c = &p.columns[0];
        assert_eq!(
            c.top_values[0],
            TopValue {
                value: "x".into(),
                count: 3
            }
        );
        assert_eq!(c.top_values.len(), 3);
        assert!((c.null_fraction * 7.0 - 2.0).abs() < 1e-12);
        assert!(c.top_values.iter().map(|t| t.count).sum::<u64>() <= 7);
    }
}
