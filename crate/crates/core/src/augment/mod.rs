//! Join and union materialization.
//!
//! A join is left-outer: every left row appears exactly once, followed by
//! one aggregated value per included right column. Keys are built per pair
//! kind: folded strings for categorical pairs, periods truncated to a common
//! resolution for temporal pairs, grid cells for spatial pairs and exact
//! numbers for numeric pairs. A left row whose key has a null part matches
//! nothing.

pub mod align;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use align::{align_coordinate, align_spatial, align_temporal};

use crate::profiler::temporal::{name_hints_time, parse_timestamp};
use crate::profiler::{
    detect_column_type, detect_temporal_resolution, is_null, parse_number, ColumnType,
    ProfilerConfig, Resolution, TableData, TableError,
};
use crate::search::{Augmentation, ColumnPair, JoinPair, PairKind};
use crate::sketches::minhash::normalize_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationFn {
    First,
    Count,
    Sum,
    Mean,
    Max,
    Min,
}

impl AggregationFn {
    pub const ALL: [AggregationFn; 6] = [
        AggregationFn::First,
        AggregationFn::Count,
        AggregationFn::Sum,
        AggregationFn::Mean,
        AggregationFn::Max,
        AggregationFn::Min,
    ];

    pub fn requires_numeric(self) -> bool {
        !matches!(self, AggregationFn::First | AggregationFn::Count)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AggregationFn::First => "first",
            AggregationFn::Count => "count",
            AggregationFn::Sum => "sum",
            AggregationFn::Mean => "mean",
            AggregationFn::Max => "max",
            AggregationFn::Min => "min",
        }
    }
}

impl fmt::Display for AggregationFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AggregationFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        AggregationFn::ALL
            .into_iter()
            .find(|a| a.as_str() == lower || (lower == "avg" && *a == AggregationFn::Mean))
            .ok_or_else(|| format!("unknown aggregation '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    #[default]
    Join,
    Union,
}

/// One key pair. Field aliases let the pairs of a search result's join or
/// union candidate be passed through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecPair {
    #[serde(alias = "query_column")]
    pub left_column: String,
    #[serde(alias = "candidate_column")]
    pub right_column: String,
    /// Inferred from the column contents when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<PairKind>,
    #[serde(
        default,
        alias = "query_longitude",
        skip_serializing_if = "Option::is_none"
    )]
    pub left_longitude: Option<String>,
    #[serde(
        default,
        alias = "candidate_longitude",
        skip_serializing_if = "Option::is_none"
    )]
    pub right_longitude: Option<String>,
}

impl SpecPair {
    pub fn new(left: &str, right: &str) -> Self {
        SpecPair {
            left_column: left.to_string(),
            right_column: right.to_string(),
            kind: None,
            left_longitude: None,
            right_longitude: None,
        }
    }

    pub fn with_kind(mut self, kind: PairKind) -> Self {
        self.kind = Some(kind);
        self
    }
}

impl From<&JoinPair> for SpecPair {
    fn from(p: &JoinPair) -> Self {
        SpecPair {
            left_column: p.query_column.clone(),
            right_column: p.candidate_column.clone(),
            kind: Some(p.kind),
            left_longitude: p.query_longitude.clone(),
            right_longitude: p.candidate_longitude.clone(),
        }
    }
}

impl From<&ColumnPair> for SpecPair {
    fn from(p: &ColumnPair) -> Self {
        SpecPair::new(&p.query_column, &p.candidate_column)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentationSpec {
    #[serde(default)]
    pub mode: AugmentMode,
    pub pairs: Vec<SpecPair>,
    #[serde(default)]
    pub agg: BTreeMap<String, AggregationFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_resolution: Option<Resolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_grid_degrees: Option<f64>,
    /// Right columns appended by a join; empty means every right column
    /// that is not a join key.
    #[serde(default)]
    pub include_columns: Vec<String>,
}

impl AugmentationSpec {
    /// Spec for a search result's suggested augmentation: a join on its best
    /// key pair (numeric pairs only when nothing else matched), or a union
    /// over all matched columns.
    pub fn from_augmentation(a: &Augmentation) -> Self {
        match a {
            Augmentation::Join(c) => {
                let best = c
                    .pairs
                    .iter()
                    .find(|p| p.kind != PairKind::Numeric)
                    .or(c.pairs.first());
                AugmentationSpec {
                    mode: AugmentMode::Join,
                    pairs: best.map(SpecPair::from).into_iter().collect(),
                    ..Default::default()
                }
            }
            Augmentation::Union(c) => AugmentationSpec {
                mode: AugmentMode::Union,
                pairs: c.column_pairs.iter().map(SpecPair::from).collect(),
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error("augmentation needs at least one column pair")]
    NoPairs,
    #[error("unknown {side} column '{column}'")]
    UnknownColumn { side: &'static str, column: String },
    #[error(
        "columns '{left}' ({left_type}) and '{right}' ({right_type}) cannot be paired as {kind}"
    )]
    IncompatiblePairKinds {
        left: String,
        right: String,
        left_type: ColumnType,
        right_type: ColumnType,
        kind: String,
    },
    #[error("aggregation {agg} needs a numeric column, '{column}' is {column_type}")]
    AggregationOnNonNumeric {
        column: String,
        agg: AggregationFn,
        column_type: ColumnType,
    },
    #[error("no aggregation given for included column '{0}'")]
    MissingAggregation(String),
    #[error("spatial grid size must be a positive number of degrees")]
    InvalidGrid,
    #[error("spatial pair on '{0}' needs both longitude columns")]
    MissingLongitude(String),
    #[error("{0}")]
    Table(String),
}

impl From<TableError> for AugmentError {
    fn from(e: TableError) -> Self {
        AugmentError::Table(e.to_string())
    }
}

impl AugmentError {
    pub fn code(&self) -> &'static str {
        match self {
            AugmentError::NoPairs => "NoPairs",
            AugmentError::UnknownColumn { .. } => "UnknownColumn",
            AugmentError::IncompatiblePairKinds { .. } => "IncompatiblePairKinds",
            AugmentError::AggregationOnNonNumeric { .. } => "AggregationOnNonNumeric",
            AugmentError::MissingAggregation(_) => "MissingAggregation",
            AugmentError::InvalidGrid => "InvalidGrid",
            AugmentError::MissingLongitude(_) => "MissingLongitude",
            AugmentError::Table(_) => "InvalidTable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentProvenance {
    #[serde(default)]
    pub left_id: String,
    #[serde(default)]
    pub right_id: String,
    /// The spec as executed, with defaults filled in.
    pub spec: AugmentationSpec,
    pub left_rows: usize,
    pub right_rows: usize,
    pub result_rows: usize,
    /// Resolution temporal keys were truncated to, when any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_resolution: Option<Resolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTable {
    pub table: TableData,
    pub provenance: AugmentProvenance,
}

fn column<'a>(
    t: &'a TableData,
    side: &'static str,
    name: &str,
) -> Result<&'a [String], AugmentError> {
    t.column(name)
        .map(|c| c.values.as_slice())
        .ok_or_else(|| AugmentError::UnknownColumn {
            side,
            column: name.to_string(),
        })
}

fn detected_type(values: &[String], name: &str, config: &ProfilerConfig) -> ColumnType {
    detect_column_type(values, name, config).column_type
}

fn is_numeric(ty: ColumnType) -> bool {
    ty.is_numeric()
}

/// Fills `include_columns` (when empty) with every right column that is
/// not a join key, and gives each included column without an aggregation
/// `Mean` when numeric, `First` otherwise.
pub fn fill_default_aggregations(spec: &mut AugmentationSpec, right: &TableData) {
    if spec.mode != AugmentMode::Join {
        return;
    }
    let config = ProfilerConfig::default();
    if spec.include_columns.is_empty() {
        let keys: Vec<&str> = spec
            .pairs
            .iter()
            .flat_map(|p| {
                std::iter::once(p.right_column.as_str()).chain(p.right_longitude.as_deref())
            })
            .collect();
        spec.include_columns = right
            .columns()
            .iter()
            .filter(|c| !keys.contains(&c.name.as_str()))
            .map(|c| c.name.clone())
            .collect();
    }
    for name in &spec.include_columns {
        if spec.agg.contains_key(name) {
            continue;
        }
        let Some(col) = right.column(name) else {
            continue;
        };
        let agg = if is_numeric(detected_type(&col.values, name, &config)) {
            AggregationFn::Mean
        } else {
            AggregationFn::First
        };
        spec.agg.insert(name.clone(), agg);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum KeyPart {
    Text(String),
    Int(i64),
    Num(u64),
}

fn num_key(v: f64) -> KeyPart {
    // Normalize -0.0 so that it equals 0.0.
    KeyPart::Num(if v == 0.0 {
        0.0f64.to_bits()
    } else {
        v.to_bits()
    })
}

/// How one key component is computed from a raw cell.
#[derive(Debug, Clone, Copy)]
enum KeyRule {
    Text,
    Time { hint: bool, resolution: Resolution },
    Number,
    Grid(f64),
}

fn key_part(cell: &str, rule: KeyRule, config: &ProfilerConfig) -> Option<KeyPart> {
    if is_null(cell, config) {
        return None;
    }
    match rule {
        KeyRule::Text => Some(KeyPart::Text(normalize_value(cell))),
        KeyRule::Time { hint, resolution } => {
            parse_timestamp(cell, hint).map(|t| KeyPart::Int(align_temporal(t, resolution)))
        }
        KeyRule::Number => parse_number(cell).map(num_key),
        KeyRule::Grid(g) => parse_number(cell).map(|v| KeyPart::Int(align_coordinate(v, g))),
    }
}

struct KeyColumns<'a> {
    left: Vec<(&'a [String], KeyRule)>,
    right: Vec<(&'a [String], KeyRule)>,
    resolution: Option<Resolution>,
}

fn column_resolution(values: &[String], name: &str, config: &ProfilerConfig) -> Resolution {
    let hint = name_hints_time(name);
    let ts: Vec<i64> = values
        .iter()
        .filter(|v| !is_null(v, config))
        .filter_map(|v| parse_timestamp(v, hint))
        .collect();
    if ts.is_empty() {
        Resolution::Day
    } else {
        detect_temporal_resolution(&ts)
    }
}

fn incompatible(p: &SpecPair, l: ColumnType, r: ColumnType, kind: &str) -> AugmentError {
    AugmentError::IncompatiblePairKinds {
        left: p.left_column.clone(),
        right: p.right_column.clone(),
        left_type: l,
        right_type: r,
        kind: kind.to_string(),
    }
}

fn key_columns<'a>(
    left: &'a TableData,
    right: &'a TableData,
    spec: &AugmentationSpec,
    config: &ProfilerConfig,
) -> Result<KeyColumns<'a>, AugmentError> {
    if let Some(g) = spec.spatial_grid_degrees {
        if !(g.is_finite() && g > 0.0) {
            return Err(AugmentError::InvalidGrid);
        }
    }
    let mut out = KeyColumns {
        left: Vec::new(),
        right: Vec::new(),
        resolution: None,
    };
    let mut temporal_pairs = Vec::new();
    for p in &spec.pairs {
        let lv = column(left, "left", &p.left_column)?;
        let rv = column(right, "right", &p.right_column)?;
        let lt = detected_type(lv, &p.left_column, config);
        let rt = detected_type(rv, &p.right_column, config);
        let kind = match p.kind {
            Some(k) => k,
            None if lt == rt => match lt {
                ColumnType::Temporal => PairKind::Temporal,
                ColumnType::Categorical => PairKind::Categorical,
                _ => PairKind::Numeric,
            },
            None => return Err(incompatible(p, lt, rt, "inferred kind")),
        };
        match kind {
            PairKind::Categorical => {
                out.left.push((lv, KeyRule::Text));
                out.right.push((rv, KeyRule::Text));
            }
            PairKind::Numeric => {
                if !(is_numeric(lt) && is_numeric(rt)) {
                    return Err(incompatible(p, lt, rt, "numeric"));
                }
                out.left.push((lv, KeyRule::Number));
                out.right.push((rv, KeyRule::Number));
            }
            PairKind::Temporal => {
                if lt != ColumnType::Temporal || rt != ColumnType::Temporal {
                    return Err(incompatible(p, lt, rt, "temporal"));
                }
                temporal_pairs.push((out.left.len(), p, lv, rv));
                // Placeholder rule, replaced once the common resolution is known.
                out.left.push((lv, KeyRule::Text));
                out.right.push((rv, KeyRule::Text));
            }
            PairKind::Spatial => {
                let mut cols = vec![(lv, rv, lt, rt)];
                match (&p.left_longitude, &p.right_longitude) {
                    (Some(llon), Some(rlon)) => {
                        let llv = column(left, "left", llon)?;
                        let rlv = column(right, "right", rlon)?;
                        cols.push((
                            llv,
                            rlv,
                            detected_type(llv, llon, config),
                            detected_type(rlv, rlon, config),
                        ));
                    }
                    (None, None) => {}
                    _ => return Err(AugmentError::MissingLongitude(p.left_column.clone())),
                }
                for (l, r, lt, rt) in cols {
                    if !(is_numeric(lt) && is_numeric(rt)) {
                        return Err(incompatible(p, lt, rt, "spatial"));
                    }
                    let rule = spec
                        .spatial_grid_degrees
                        .map_or(KeyRule::Number, KeyRule::Grid);
                    out.left.push((l, rule));
                    out.right.push((r, rule));
                }
            }
        }
    }
    if !temporal_pairs.is_empty() {
        let resolution = spec.temporal_resolution.unwrap_or_else(|| {
            temporal_pairs
                .iter()
                .flat_map(|(_, p, lv, rv)| {
                    [
                        column_resolution(lv, &p.left_column, config),
                        column_resolution(rv, &p.right_column, config),
                    ]
                })
                .max()
                .expect("nonempty")
        });
        for (i, p, _, _) in temporal_pairs {
            out.left[i].1 = KeyRule::Time {
                hint: name_hints_time(&p.left_column),
                resolution,
            };
            out.right[i].1 = KeyRule::Time {
                hint: name_hints_time(&p.right_column),
                resolution,
            };
        }
        out.resolution = Some(resolution);
    }
    Ok(out)
}

fn row_key(
    cols: &[(&[String], KeyRule)],
    row: usize,
    config: &ProfilerConfig,
) -> Option<Vec<KeyPart>> {
    cols.iter()
        .map(|(values, rule)| key_part(&values[row], *rule, config))
        .collect()
}

/// Integral values below 1e15 print without a fraction; everything else
/// uses the shortest representation that reads back to the same `f64`.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn aggregate(
    values: &[String],
    rows: &[usize],
    agg: AggregationFn,
    config: &ProfilerConfig,
) -> String {
    match agg {
        AggregationFn::Count => rows.len().to_string(),
        AggregationFn::First => rows
            .iter()
            .map(|&r| &values[r])
            .find(|v| !is_null(v, config))
            .cloned()
            .unwrap_or_default(),
        _ => {
            let nums: Vec<f64> = rows
                .iter()
                .map(|&r| &values[r])
                .filter(|v| !is_null(v, config))
                .filter_map(|v| parse_number(v))
                .collect();
            if nums.is_empty() {
                return String::new();
            }
            let v = match agg {
                AggregationFn::Sum => nums.iter().sum(),
                AggregationFn::Mean => nums.iter().sum::<f64>() / nums.len() as f64,
                AggregationFn::Max => nums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                _ => nums.iter().copied().fold(f64::INFINITY, f64::min),
            };
            format_number(v)
        }
    }
}

/// Left-outer join of `right` onto `left`.
pub fn join(
    left: &TableData,
    right: &TableData,
    spec: &AugmentationSpec,
) -> Result<AugmentedTable, AugmentError> {
    if spec.pairs.is_empty() {
        return Err(AugmentError::NoPairs);
    }
    let config = ProfilerConfig::default();
    let keys = key_columns(left, right, spec, &config)?;

    let mut filled;
    let spec = if spec.include_columns.is_empty() {
        filled = spec.clone();
        fill_default_aggregations(&mut filled, right);
        &filled
    } else {
        spec
    };
    let include = spec.include_columns.clone();
    let mut appended = Vec::with_capacity(include.len());
    for name in &include {
        let values = column(right, "right", name)?;
        let agg = *spec
            .agg
            .get(name)
            .ok_or_else(|| AugmentError::MissingAggregation(name.clone()))?;
        if agg.requires_numeric() {
            let ty = detected_type(values, name, &config);
            // An all-null column aggregates to nulls under any function.
            if !is_numeric(ty) && !values.iter().all(|v| is_null(v, &config)) {
                return Err(AugmentError::AggregationOnNonNumeric {
                    column: name.clone(),
                    agg,
                    column_type: ty,
                });
            }
        }
        appended.push((name, values, agg));
    }

    let mut groups: HashMap<Vec<KeyPart>, Vec<usize>> = HashMap::new();
    for r in 0..right.row_count() {
        if let Some(k) = row_key(&keys.right, r, &config) {
            groups.entry(k).or_default().push(r);
        }
    }

    let mut columns: Vec<crate::profiler::Column> = left.columns().to_vec();
    let mut out_values: Vec<Vec<String>> =
        vec![Vec::with_capacity(left.row_count()); appended.len()];
    let empty: Vec<usize> = Vec::new();
    for row in 0..left.row_count() {
        let rows = row_key(&keys.left, row, &config)
            .and_then(|k| groups.get(&k))
            .unwrap_or(&empty);
        for (i, (_, values, agg)) in appended.iter().enumerate() {
            out_values[i].push(aggregate(values, rows, *agg, &config));
        }
    }
    for ((name, _, _), values) in appended.iter().zip(out_values) {
        let taken = columns
            .iter()
            .any(|c| c.name.to_lowercase() == name.to_lowercase());
        let name = if taken {
            format!("{name}_right")
        } else {
            (*name).clone()
        };
        columns.push(crate::profiler::Column { name, values });
    }
    let table = TableData::new(columns)?;

    let mut executed = spec.clone();
    executed.mode = AugmentMode::Join;
    executed.include_columns = include.clone();
    executed.agg = appended
        .iter()
        .map(|(n, _, a)| ((*n).clone(), *a))
        .collect();
    Ok(AugmentedTable {
        provenance: AugmentProvenance {
            left_id: String::new(),
            right_id: String::new(),
            spec: executed,
            left_rows: left.row_count(),
            right_rows: right.row_count(),
            result_rows: table.row_count(),
            temporal_resolution: keys.resolution,
        },
        table,
    })
}

/// Appends the rows of `right` below `left`, placing each paired right
/// column under its left column; unpaired left columns get nulls.
pub fn union(
    left: &TableData,
    right: &TableData,
    spec: &AugmentationSpec,
) -> Result<AugmentedTable, AugmentError> {
    if spec.pairs.is_empty() {
        return Err(AugmentError::NoPairs);
    }
    let config = ProfilerConfig::default();
    let mut source: HashMap<&str, &[String]> = HashMap::new();
    let mut used_right = std::collections::HashSet::new();
    for p in &spec.pairs {
        let lv = column(left, "left", &p.left_column)?;
        let rv = column(right, "right", &p.right_column)?;
        let lt = detected_type(lv, &p.left_column, &config);
        let rt = detected_type(rv, &p.right_column, &config);
        if lt != rt {
            return Err(incompatible(p, lt, rt, "union"));
        }
        if source.insert(p.left_column.as_str(), rv).is_some()
            || !used_right.insert(p.right_column.as_str())
        {
            return Err(AugmentError::IncompatiblePairKinds {
                left: p.left_column.clone(),
                right: p.right_column.clone(),
                left_type: lt,
                right_type: rt,
                kind: "one-to-one union".into(),
            });
        }
    }
    let columns = left
        .columns()
        .iter()
        .map(|c| {
            let mut values = c.values.clone();
            match source.get(c.name.as_str()) {
                Some(rv) => values.extend(rv.iter().cloned()),
                None => values.extend(std::iter::repeat(String::new()).take(right.row_count())),
            }
            crate::profiler::Column {
                name: c.name.clone(),
                values,
            }
        })
        .collect();
    let table = TableData::new(columns)?;
    let mut executed = spec.clone();
    executed.mode = AugmentMode::Union;
    Ok(AugmentedTable {
        provenance: AugmentProvenance {
            left_id: String::new(),
            right_id: String::new(),
            spec: executed,
            left_rows: left.row_count(),
            right_rows: right.row_count(),
            result_rows: table.row_count(),
            temporal_resolution: None,
        },
        table,
    })
}

/// Dispatches on `spec.mode`.
pub fn augment(
    left: &TableData,
    right: &TableData,
    spec: &AugmentationSpec,
) -> Result<AugmentedTable, AugmentError> {
    match spec.mode {
        AugmentMode::Join => join(left, right, spec),
        AugmentMode::Union => union(left, right, spec),
    }
}
