// Random join/union cases and a nested-loop reference implementation.
// Shared by the core augment tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use dsearch_core::augment::{AggregationFn, AugmentMode, AugmentationSpec, SpecPair};
use dsearch_core::profiler::{Resolution, TableData};
use dsearch_core::search::PairKind;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Grid {
    fn col(&self, name: &str) -> usize {
        self.headers
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }

    pub fn to_table(&self) -> TableData {
        let pairs = self
            .headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), self.rows.iter().map(|r| r[i].clone()).collect()))
            .collect();
        TableData::from_pairs(pairs).unwrap()
    }

    pub fn from_table(t: &TableData) -> Grid {
        Grid {
            headers: t.columns().iter().map(|c| c.name.clone()).collect(),
            rows: (0..t.row_count())
                .map(|r| t.columns().iter().map(|c| c.values[r].clone()).collect())
                .collect(),
        }
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.headers).unwrap();
        for r in &self.rows {
            w.write_record(r).unwrap();
        }
        w.into_inner().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Text,
    Number,
    Date,
    DateTime,
    Lat,
    Lon,
}

const WORDS: [&str; 8] = [
    "alpha", "Bravo", "charlie", "DELTA", "echo", "foxtrot", "golf", "hotel",
];

fn cell(rng: &mut impl Rng, kind: Kind, null_p: f64) -> String {
    if rng.random_bool(null_p) {
        return String::new();
    }
    match kind {
        Kind::Text => {
            let w = WORDS[rng.random_range(0..WORDS.len())];
            match rng.random_range(0..3) {
                0 => w.to_uppercase(),
                1 => format!(" {w}"),
                _ => w.to_string(),
            }
        }
        Kind::Number => {
            if rng.random_bool(0.5) {
                rng.random_range(-5..6).to_string()
            } else {
                format!("{:.2}", rng.random_range(-500..500) as f64 / 100.0)
            }
        }
        // A six-day window keeps the median gap under a week.
        Kind::Date => NaiveDate::from_ymd_opt(2020, 4, rng.random_range(1..7))
            .unwrap()
            .format("%Y-%m-%d")
            .to_string(),
        Kind::DateTime => {
            let d = NaiveDate::from_ymd_opt(2020, rng.random_range(3..6), rng.random_range(1..29))
                .unwrap();
            d.and_hms_opt(rng.random_range(0..24), rng.random_range(0..60), 0)
                .unwrap()
                .format("%Y-%m-%d %H:%M:%S")
                .to_string()
        }
        Kind::Lat => format!("{:.1}", 40.0 + rng.random_range(0..30) as f64 / 10.0),
        Kind::Lon => format!("{:.1}", -74.0 + rng.random_range(0..30) as f64 / 10.0),
    }
}

fn fill(rng: &mut impl Rng, cols: &[(String, Kind, f64)], rows: usize) -> Grid {
    Grid {
        headers: cols.iter().map(|c| c.0.clone()).collect(),
        rows: (0..rows)
            .map(|_| cols.iter().map(|(_, k, p)| cell(rng, *k, *p)).collect())
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub left: Grid,
    pub right: Grid,
    pub spec: AugmentationSpec,
    /// Resolution temporal keys are compared at; None when no temporal pair.
    pub resolution: Option<Resolution>,
    /// Type of each right column as generated.
    right_numeric: BTreeMap<String, bool>,
}

pub fn random_case(rng: &mut impl Rng, max_rows: usize) -> Case {
    let mode = if rng.random_bool(0.7) {
        AugmentMode::Join
    } else {
        AugmentMode::Union
    };
    let left_rows = rng.random_range(5..=max_rows);
    let right_rows = rng.random_range(5..=max_rows);
    if mode == AugmentMode::Union {
        return union_case(rng, left_rows, right_rows);
    }

    let mut lcols: Vec<(String, Kind, f64)> = Vec::new();
    let mut rcols: Vec<(String, Kind, f64)> = Vec::new();
    let mut pairs = Vec::new();
    let mut kinds = vec![0u8, 1, 2, 3];
    kinds.shuffle(rng);
    let n_pairs = rng.random_range(1..=2);
    let mut resolution = None;
    let mut explicit_res = None;
    let mut grid = None;
    for (i, k) in kinds.into_iter().take(n_pairs).enumerate() {
        let (ln, rn) = (format!("k{i}"), format!("Key{i}"));
        let pair = match k {
            0 => {
                lcols.push((ln.clone(), Kind::Text, 0.1));
                rcols.push((rn.clone(), Kind::Text, 0.1));
                let p = SpecPair::new(&ln, &rn);
                if rng.random_bool(0.5) {
                    p.with_kind(PairKind::Categorical)
                } else {
                    p
                }
            }
            1 => {
                let kind = Kind::Number;
                lcols.push((ln.clone(), kind, 0.1));
                rcols.push((rn.clone(), kind, 0.1));
                let p = SpecPair::new(&ln, &rn);
                if rng.random_bool(0.5) {
                    p.with_kind(PairKind::Numeric)
                } else {
                    p
                }
            }
            2 => {
                if rng.random_bool(0.4) {
                    lcols.push((ln.clone(), Kind::Date, 0.1));
                    rcols.push((rn.clone(), Kind::Date, 0.1));
                    resolution = Some(Resolution::Day);
                } else {
                    lcols.push((ln.clone(), Kind::DateTime, 0.1));
                    rcols.push((rn.clone(), Kind::DateTime, 0.1));
                    let r = *[
                        Resolution::Day,
                        Resolution::Week,
                        Resolution::Month,
                        Resolution::Year,
                    ]
                    .choose(rng)
                    .unwrap();
                    resolution = Some(r);
                    explicit_res = Some(r);
                }
                SpecPair::new(&ln, &rn).with_kind(PairKind::Temporal)
            }
            _ => {
                let (llon, rlon) = (format!("lon{i}"), format!("Lng{i}"));
                lcols.push((ln.clone(), Kind::Lat, 0.1));
                lcols.push((llon.clone(), Kind::Lon, 0.1));
                rcols.push((rn.clone(), Kind::Lat, 0.1));
                rcols.push((rlon.clone(), Kind::Lon, 0.1));
                grid = [None, Some(0.5), Some(1.0), Some(2.0)]
                    .choose(rng)
                    .copied()
                    .flatten();
                SpecPair {
                    left_longitude: Some(llon),
                    right_longitude: Some(rlon),
                    ..SpecPair::new(&ln, &rn).with_kind(PairKind::Spatial)
                }
            }
        };
        pairs.push(pair);
    }
    lcols.push(("l0".into(), Kind::Number, 0.1));
    let mut right_numeric = BTreeMap::new();
    let n_values = rng.random_range(1..=3);
    for j in 0..n_values {
        // Occasionally reuse a left name to exercise the collision suffix.
        let name = if j == 0 && rng.random_bool(0.3) {
            "L0".to_string()
        } else {
            format!("v{j}")
        };
        let kind = if rng.random_bool(0.6) {
            Kind::Number
        } else {
            Kind::Text
        };
        right_numeric.insert(name.clone(), kind == Kind::Number);
        rcols.push((name, kind, 0.15));
    }

    let mut spec = AugmentationSpec {
        mode,
        pairs,
        temporal_resolution: explicit_res,
        spatial_grid_degrees: grid,
        ..Default::default()
    };
    let value_names: Vec<String> = right_numeric.keys().cloned().collect();
    let include: Vec<String> = if rng.random_bool(0.3) {
        Vec::new()
    } else {
        let mut v: Vec<String> = value_names
            .iter()
            .filter(|_| rng.random_bool(0.7))
            .cloned()
            .collect();
        if v.is_empty() {
            v.push(value_names[0].clone());
        }
        v.shuffle(rng);
        v
    };
    for name in &value_names {
        if include.is_empty() && rng.random_bool(0.5) {
            continue;
        }
        let numeric = right_numeric[name];
        let choices: &[AggregationFn] = if numeric {
            &AggregationFn::ALL
        } else {
            &[AggregationFn::First, AggregationFn::Count]
        };
        spec.agg.insert(name.clone(), *choices.choose(rng).unwrap());
    }
    spec.include_columns = include;

    // Shared key values make matches likely.
    let left = fill(rng, &lcols, left_rows);
    let mut right = fill(rng, &rcols, right_rows);
    // Key columns come first on both sides, in pair order.
    let width = key_width(&spec);
    for r in right.rows.iter_mut() {
        if rng.random_bool(0.5) {
            let src = &left.rows[rng.random_range(0..left.rows.len())];
            r[..width].clone_from_slice(&src[..width]);
        }
    }
    Case {
        left,
        right,
        spec,
        resolution,
        right_numeric,
    }
}

fn key_width(spec: &AugmentationSpec) -> usize {
    spec.pairs
        .iter()
        .map(|p| 1 + usize::from(p.right_longitude.is_some()))
        .sum()
}

fn union_case(rng: &mut impl Rng, left_rows: usize, right_rows: usize) -> Case {
    let kinds = [Kind::Text, Kind::Number, Kind::Date];
    let lcols: Vec<(String, Kind, f64)> = (0..rng.random_range(2..=4))
        .map(|i| (format!("c{i}"), kinds[rng.random_range(0..3)], 0.1))
        .collect();
    let rcols: Vec<(String, Kind, f64)> = (0..rng.random_range(2..=4))
        .map(|i| (format!("C{i}_r"), kinds[rng.random_range(0..3)], 0.1))
        .collect();
    let mut rfree: Vec<usize> = (0..rcols.len()).collect();
    rfree.shuffle(rng);
    let mut pairs = Vec::new();
    for (name, kind, _) in &lcols {
        if let Some(pos) = rfree.iter().position(|&j| rcols[j].1 == *kind) {
            if rng.random_bool(0.8) {
                let j = rfree.remove(pos);
                pairs.push(SpecPair::new(name, &rcols[j].0));
            }
        }
    }
    if pairs.is_empty() {
        return union_case(rng, left_rows, right_rows);
    }
    Case {
        left: fill(rng, &lcols, left_rows),
        right: fill(rng, &rcols, right_rows),
        spec: AugmentationSpec {
            mode: AugmentMode::Union,
            pairs,
            ..Default::default()
        },
        resolution: None,
        right_numeric: BTreeMap::new(),
    }
}

fn is_null(s: &str) -> bool {
    s.trim().is_empty()
}

fn parse_time(s: &str) -> NaiveDateTime {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .or_else(|_| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d").map(|d| d.and_hms_opt(0, 0, 0).unwrap())
        })
        .unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn period(s: &str, r: Resolution) -> String {
    let t = parse_time(s);
    let d = t.date();
    match r {
        Resolution::Day => d.to_string(),
        Resolution::Week => {
            let monday = d - chrono::Duration::days(d.weekday().num_days_from_monday() as i64);
            format!("w{monday}")
        }
        Resolution::Month => format!("{}-{}", d.year(), d.month()),
        Resolution::Year => d.year().to_string(),
        other => panic!("resolution {other:?} not generated"),
    }
}

fn cell_match(a: &str, b: &str, kind: PairKind, case: &Case) -> bool {
    if is_null(a) || is_null(b) {
        return false;
    }
    match kind {
        PairKind::Categorical => a.trim().to_lowercase() == b.trim().to_lowercase(),
        PairKind::Numeric => a.trim().parse::<f64>().unwrap() == b.trim().parse::<f64>().unwrap(),
        PairKind::Temporal => {
            let r = case.resolution.unwrap();
            period(a, r) == period(b, r)
        }
        PairKind::Spatial => {
            let (x, y) = (
                a.trim().parse::<f64>().unwrap(),
                b.trim().parse::<f64>().unwrap(),
            );
            match case.spec.spatial_grid_degrees {
                None => x == y,
                Some(g) => (x / g).floor() == (y / g).floor(),
            }
        }
    }
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

/// Nested-loop left-outer join with per-group aggregation.
fn oracle_join(case: &Case) -> Grid {
    let (l, r, spec) = (&case.left, &case.right, &case.spec);
    let mut conds: Vec<(usize, usize, PairKind)> = Vec::new();
    for p in &spec.pairs {
        let kind = p.kind.unwrap_or_else(|| {
            // Kind was left to inference; the generator only does that for
            // text and number keys.
            let sample = l
                .rows
                .iter()
                .map(|row| &row[l.col(&p.left_column)])
                .find(|v| !is_null(v))
                .unwrap();
            if sample.trim().parse::<f64>().is_ok() {
                PairKind::Numeric
            } else {
                PairKind::Categorical
            }
        });
        conds.push((l.col(&p.left_column), r.col(&p.right_column), kind));
        if let (Some(a), Some(b)) = (&p.left_longitude, &p.right_longitude) {
            conds.push((l.col(a), r.col(b), kind));
        }
    }
    let include: Vec<String> = if spec.include_columns.is_empty() {
        let keys: Vec<usize> = conds.iter().map(|c| c.1).collect();
        (0..r.headers.len())
            .filter(|i| !keys.contains(i))
            .map(|i| r.headers[i].clone())
            .collect()
    } else {
        spec.include_columns.clone()
    };
    let aggs: Vec<AggregationFn> = include
        .iter()
        .map(|n| {
            spec.agg
                .get(n)
                .copied()
                .unwrap_or(if case.right_numeric[n] {
                    AggregationFn::Mean
                } else {
                    AggregationFn::First
                })
        })
        .collect();

    let mut headers = l.headers.clone();
    for n in &include {
        if l.headers
            .iter()
            .any(|h| h.to_lowercase() == n.to_lowercase())
        {
            headers.push(format!("{n}_right"));
        } else {
            headers.push(n.clone());
        }
    }
    let mut rows = Vec::new();
    for lrow in &l.rows {
        let matched: Vec<&Vec<String>> = r
            .rows
            .iter()
            .filter(|rrow| {
                conds
                    .iter()
                    .all(|&(a, b, k)| cell_match(&lrow[a], &rrow[b], k, case))
            })
            .collect();
        let mut out = lrow.clone();
        for (n, agg) in include.iter().zip(&aggs) {
            let ci = r.col(n);
            let cells: Vec<&str> = matched.iter().map(|row| row[ci].as_str()).collect();
            let v = match agg {
                AggregationFn::Count => cells.len().to_string(),
                AggregationFn::First => cells
                    .iter()
                    .find(|c| !is_null(c))
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
                _ => numeric(*agg, &cells),
            };
            out.push(v);
        }
        rows.push(out);
    }
    Grid { headers, rows }
}

fn numeric(agg: AggregationFn, cells: &[&str]) -> String {
    let nums: Vec<f64> = cells
        .iter()
        .filter(|c| !is_null(c))
        .map(|c| c.trim().parse::<f64>().unwrap())
        .collect();
    match agg {
        _ if nums.is_empty() => String::new(),
        AggregationFn::Sum => fmt(nums.iter().sum()),
        AggregationFn::Mean => fmt(nums.iter().sum::<f64>() / nums.len() as f64),
        AggregationFn::Max => fmt(nums.iter().copied().fold(f64::MIN, f64::max)),
        AggregationFn::Min => fmt(nums.iter().copied().fold(f64::MAX, f64::min)),
        _ => unreachable!(),
    }
}

fn oracle_union(case: &Case) -> Grid {
    let (l, r) = (&case.left, &case.right);
    let mut rows = l.rows.clone();
    for rrow in &r.rows {
        rows.push(
            l.headers
                .iter()
                .map(
                    |h| match case.spec.pairs.iter().find(|p| &p.left_column == h) {
                        Some(p) => rrow[r.col(&p.right_column)].clone(),
                        None => String::new(),
                    },
                )
                .collect(),
        );
    }
    Grid {
        headers: l.headers.clone(),
        rows,
    }
}

pub fn oracle(case: &Case) -> Grid {
    match case.spec.mode {
        AugmentMode::Join => oracle_join(case),
        AugmentMode::Union => oracle_union(case),
    }
}
