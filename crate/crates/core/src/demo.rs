//! Synthetic bicycle-demand walkthrough: a month of daily trip counts is
//! extended with more months found by union search and then with
//! precipitation found by join search, refitting a linear model each time.
//!
//! Generator: `trips = 3000 + 80 * temperature - 60 * rain + N(0, 400^2)`,
//! with daily temperature around a monthly mean and rain on about 30% of
//! days.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::augment::{augment, fill_default_aggregations, AugmentError, AugmentationSpec};
use crate::index::IndexShard;
use crate::num::Scalar;
use crate::profiler::{
    parse_number, profile_table, DatasetMeta, DatasetProfile, ProfilerConfig, TableData,
};
use crate::search::{search, Augmentation, Page, Query, RelatedMode, RelatedQuery, SearchError};

// Monthly mean temperature (°C), January first.
const MONTHLY_MEAN_TEMP: [f64; 12] = [
    1.0, 2.5, 6.5, 12.0, 17.5, 22.5, 25.5, 25.0, 21.0, 15.0, 9.0, 4.0,
];

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("profiling {0}: {1}")]
    Profile(String, String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error("{0}")]
    NotFound(String),
}

#[derive(Debug, Clone)]
pub struct BicycleData {
    /// Trips and temperature for April 2020.
    pub april: TableData,
    /// May to December with differently cased column names.
    pub extension: TableData,
    /// Precipitation per day and station, April to December.
    pub weather: TableData,
    /// Unrelated datasets indexed alongside, as (name, table).
    pub decoys: Vec<(String, TableData)>,
}

fn day(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn round1(v: f64) -> String {
    format!("{:.1}", v)
}

pub fn generate_bicycle(seed: u64) -> BicycleData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let temp_noise = Normal::new(0.0, 3.0).expect("valid");
    let trip_noise = Normal::new(0.0, 400.0).expect("valid");
    let rain_amount = Exp::new(1.0 / 8.0).expect("valid");
    let gauge_noise = Normal::new(0.0, 0.3).expect("valid");

    let start = NaiveDate::from_ymd_opt(2020, 4, 1).expect("valid");
    let end = NaiveDate::from_ymd_opt(2020, 12, 31).expect("valid");
    let mut april = (Vec::new(), Vec::new(), Vec::new());
    let mut ext = (Vec::new(), Vec::new(), Vec::new());
    let mut weather = (Vec::new(), Vec::new(), Vec::new());
    let mut d = start;
    while d <= end {
        let month = chrono::Datelike::month0(&d) as usize;
        let temp = MONTHLY_MEAN_TEMP[month] + temp_noise.sample(&mut rng);
        let rain = if rng.random_bool(0.3) {
            rain_amount.sample(&mut rng)
        } else {
            0.0
        };
        let trips = (3000.0 + 80.0 * temp - 60.0 * rain + trip_noise.sample(&mut rng))
            .round()
            .max(0.0);
        let target = if month == 3 { &mut april } else { &mut ext };
        target.0.push(day(d));
        target.1.push(format!("{trips}"));
        target.2.push(round1(temp));
        for station in ["central_park", "laguardia"] {
            let reading = if rain > 0.0 {
                (rain + gauge_noise.sample(&mut rng)).max(0.0)
            } else {
                0.0
            };
            weather.0.push(day(d));
            weather.1.push(station.to_string());
            weather.2.push(round1(reading));
        }
        d = d + Days::new(1);
    }

    let table = |cols: Vec<(&str, Vec<String>)>| {
        TableData::from_pairs(cols.into_iter().map(|(n, v)| (n.to_string(), v)).collect())
            .expect("columns align")
    };
    let mut decoys = Vec::new();
    let mut air = (Vec::new(), Vec::new());
    let mut d = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid");
    while d < NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid") {
        air.0.push(day(d));
        air.1.push(round1(rng.random_range(2.0..40.0)));
        d = d + Days::new(1);
    }
    decoys.push((
        "Air quality readings".to_string(),
        table(vec![("date", air.0), ("pm25", air.1)]),
    ));
    let boroughs = ["Bronx", "Brooklyn", "Manhattan", "Queens", "Staten Island"];
    let kinds = [
        "Noise - Street",
        "Noise - Residential",
        "Blocked Driveway",
        "Illegal Parking",
    ];
    let mut noise = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..300 {
        noise.0.push(day(
            NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid") + Days::new(i % 365)
        ));
        noise
            .1
            .push(kinds[rng.random_range(0..kinds.len())].to_string());
        noise
            .2
            .push(boroughs[rng.random_range(0..boroughs.len())].to_string());
    }
    decoys.push((
        "Citywide noise complaints".to_string(),
        table(vec![
            ("created_date", noise.0),
            ("complaint_type", noise.1),
            ("borough", noise.2),
        ]),
    ));
    let schools: Vec<String> = (0..120).map(|i| format!("PS {}", 100 + i)).collect();
    let enrollment: Vec<String> = (0..120)
        .map(|_| rng.random_range(150..1500).to_string())
        .collect();
    decoys.push((
        "School enrollment".to_string(),
        table(vec![("school", schools), ("enrollment", enrollment)]),
    ));

    BicycleData {
        april: table(vec![
            ("date", april.0),
            ("trips", april.1),
            ("temperature", april.2),
        ]),
        extension: table(vec![
            ("Date", ext.0),
            ("TRIPS", ext.1),
            ("Temperature", ext.2),
        ]),
        weather: table(vec![
            ("date", weather.0),
            ("station", weather.1),
            ("precipitation", weather.2),
        ]),
        decoys,
    }
}

/// Coefficient of determination of an ordinary least squares fit of `y` on
/// `features` plus an intercept. `None` when the system is singular, `y` is
/// constant or there are not more rows than parameters.
pub fn ols_r2<T: Scalar>(y: &[T], features: &[Vec<T>]) -> Option<T> {
    let n = y.len();
    let p = features.len();
    if n <= p + 1 || features.iter().any(|f| f.len() != n) {
        return None;
    }
    let nf = T::from_usize_lossy(n);
    let mean = |v: &[T]| v.iter().fold(T::zero(), |a, b| a + *b) / nf;
    let ym = mean(y);
    let yc: Vec<T> = y.iter().map(|v| *v - ym).collect();
    let xc: Vec<Vec<T>> = features
        .iter()
        .map(|f| {
            let m = mean(f);
            f.iter().map(|v| *v - m).collect()
        })
        .collect();
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y);
    // Augmented normal equations [X'X | X'y] on centered data.
    let mut m: Vec<Vec<T>> = (0..p)
        .map(|i| {
            let mut row: Vec<T> = (0..p).map(|j| dot(&xc[i], &xc[j])).collect();
            row.push(dot(&xc[i], &yc));
            row
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p).max_by(|a, b| {
            m[*a][col]
                .abs()
                .partial_cmp(&m[*b][col].abs())
                .expect("finite")
        })?;
        if m[pivot][col].abs() <= T::epsilon() {
            return None;
        }
        m.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let factor = m[r][col] / m[col][col];
                for c in col..=p {
                    let v = m[col][c];
                    m[r][c] -= factor * v;
                }
            }
        }
    }
    let beta: Vec<T> = (0..p).map(|i| m[i][p] / m[i][i]).collect();
    let sst = dot(&yc, &yc);
    if sst <= T::zero() {
        return None;
    }
    let ssr = (0..n).fold(T::zero(), |acc, r| {
        let fit = (0..p).fold(T::zero(), |a, j| a + beta[j] * xc[j][r]);
        let e = yc[r] - fit;
        acc + e * e
    });
    Some(T::one() - ssr / sst)
}

/// Rows where the target and every feature parse as numbers.
pub fn regression_rows(
    table: &TableData,
    target: &str,
    features: &[&str],
) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let y = &table.column(target)?.values;
    let cols: Vec<&Vec<String>> = features
        .iter()
        .map(|f| table.column(f).map(|c| &c.values))
        .collect::<Option<_>>()?;
    let mut ys = Vec::new();
    let mut xs = vec![Vec::new(); features.len()];
    for r in 0..table.row_count() {
        let Some(yv) = parse_number(&y[r]) else {
            continue;
        };
        let row: Option<Vec<f64>> = cols.iter().map(|c| parse_number(&c[r])).collect();
        if let Some(row) = row {
            ys.push(yv);
            for (x, v) in xs.iter_mut().zip(row) {
                x.push(v);
            }
        }
    }
    Some((ys, xs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicycleReport {
    pub seed: u64,
    pub rows_before: usize,
    pub rows_after_union: usize,
    pub r2_before: f64,
    pub r2_after_union: f64,
    pub r2_after_join: f64,
    /// Name of the dataset found by union search.
    pub union_dataset: String,
    pub union_score: f64,
    /// Name of the dataset found by join search.
    pub join_dataset: String,
    pub join_score: f64,
    pub join_spec: AugmentationSpec,
}

fn profile(table: &TableData, name: &str, source: &str) -> Result<DatasetProfile, DemoError> {
    profile_table(
        table,
        &ProfilerConfig::default(),
        DatasetMeta::named(name, source),
    )
    .map_err(|e| DemoError::Profile(name.to_string(), e.to_string()))
}

fn r2(table: &TableData, features: &[&str]) -> Result<f64, DemoError> {
    let (y, xs) = regression_rows(table, "trips", features)
        .ok_or_else(|| DemoError::NotFound("regression columns".into()))?;
    ols_r2(&y, &xs).ok_or_else(|| DemoError::NotFound("a non-degenerate regression".into()))
}

fn related(profile: DatasetProfile, mode: RelatedMode) -> Query {
    Query {
        related: Some(RelatedQuery { profile, mode }),
        page: Page {
            offset: 0,
            limit: 10,
        },
        ..Default::default()
    }
}

pub fn run_bicycle_demo(seed: u64) -> Result<BicycleReport, DemoError> {
    let data = generate_bicycle(seed);
    let mut index = IndexShard::default();
    let mut tables = std::collections::BTreeMap::new();
    let mut corpus = vec![
        (
            "Bike share trips May-December 2020".to_string(),
            data.extension.clone(),
        ),
        (
            "Daily precipitation by station".to_string(),
            data.weather.clone(),
        ),
    ];
    corpus.extend(data.decoys.iter().cloned());
    for (name, table) in corpus {
        let p = profile(&table, &name, "demo")?;
        tables.insert(p.id.clone(), (name, table));
        index
            .add_dataset(p)
            .map_err(|e| DemoError::NotFound(e.to_string()))?;
    }

    let r2_before = r2(&data.april, &["temperature"])?;

    let april = profile(&data.april, "Bike share trips April 2020", "user")?;
    let page = search(&related(april, RelatedMode::Union), &index)?;
    let hit = page
        .results
        .iter()
        .find(|r| matches!(r.augmentation, Some(Augmentation::Union(_))))
        .ok_or_else(|| DemoError::NotFound("a union candidate".into()))?;
    let Some(Augmentation::Union(u)) = &hit.augmentation else {
        unreachable!()
    };
    let (union_name, right) = &tables[&hit.dataset_id];
    let spec = AugmentationSpec::from_augmentation(hit.augmentation.as_ref().expect("checked"));
    let unioned = augment(&data.april, right, &spec)?.table;
    let r2_after_union = r2(&unioned, &["temperature"])?;
    let used = hit.dataset_id.clone();
    let union_score = u.union_score;

    let extended = profile(&unioned, "Bike share trips 2020", "user")?;
    let page = search(&related(extended, RelatedMode::Join), &index)?;
    let hit = page
        .results
        .iter()
        .find(|r| r.dataset_id != used && matches!(r.augmentation, Some(Augmentation::Join(_))))
        .ok_or_else(|| DemoError::NotFound("a join candidate".into()))?;
    let Some(Augmentation::Join(j)) = &hit.augmentation else {
        unreachable!()
    };
    let (join_name, right) = &tables[&hit.dataset_id];
    let mut join_spec =
        AugmentationSpec::from_augmentation(hit.augmentation.as_ref().expect("checked"));
    fill_default_aggregations(&mut join_spec, right);
    let joined = augment(&unioned, right, &join_spec)?.table;
    let new_numeric: Vec<String> = join_spec
        .include_columns
        .iter()
        .filter(|c| join_spec.agg.get(*c) == Some(&crate::augment::AggregationFn::Mean))
        .cloned()
        .collect();
    let mut features = vec!["temperature"];
    features.extend(new_numeric.iter().map(String::as_str));
    let r2_after_join = r2(&joined, &features)?;

    Ok(BicycleReport {
        seed,
        rows_before: data.april.row_count(),
        rows_after_union: unioned.row_count(),
        r2_before,
        r2_after_union,
        r2_after_join,
        union_dataset: union_name.clone(),
        union_score,
        join_dataset: join_name.clone(),
        join_score: j.join_score,
        join_spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_null_fits() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((ols_r2(&y, &[x.clone()]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ols_r2(&[1.0, 1.0, 1.0], &[vec![1.0, 2.0, 3.0]]), None);
        assert_eq!(ols_r2(&[1.0, 2.0, 3.0], &[vec![1.0, 1.0, 1.0]]), None);
        let y32: Vec<f32> = y.iter().map(|v| *v as f32).collect();
        let x32: Vec<f32> = x.iter().map(|v| *v as f32).collect();
        assert!((ols_r2(&y32, &[x32]).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn generator_shape() {
        let d = generate_bicycle(7);
        assert_eq!(d.april.row_count(), 30);
        assert_eq!(d.extension.row_count(), 245);
        assert_eq!(d.weather.row_count(), 2 * 275);
        assert_eq!(d.extension.columns()[0].name, "Date");
        assert_eq!(generate_bicycle(7).april, d.april);
        assert_ne!(generate_bicycle(8).april, d.april);
    }
}
