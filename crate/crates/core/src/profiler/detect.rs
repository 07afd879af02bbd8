use super::temporal::{name_hints_time, parse_timestamp};
use super::types::ColumnType;
use super::ProfilerConfig;

/// Cells parsed according to the detected type. `None` marks nulls and cells
/// that did not parse.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedValues {
    Numbers(Vec<Option<f64>>),
    Timestamps(Vec<Option<i64>>),
    Text(Vec<Option<String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedColumn {
    pub column_type: ColumnType,
    pub parsed: ParsedValues,
    pub null_fraction: f64,
    pub null_count: usize,
}

pub fn is_null(cell: &str, config: &ProfilerConfig) -> bool {
    let t = cell.trim();
    t.is_empty()
        || config
            .null_literals
            .iter()
            .any(|n| n.eq_ignore_ascii_case(t))
}

/// Finite decimal number; `nan`/`inf` spellings are rejected.
pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    if t.is_empty()
        || t.bytes()
            .any(|b| b.is_ascii_alphabetic() && b != b'e' && b != b'E')
    {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Classifies a column by the share of non-null cells that parse as
/// timestamps or numbers. Spatial types are never produced here.
pub fn detect_column_type(
    values: &[String],
    column_name: &str,
    config: &ProfilerConfig,
) -> DetectedColumn {
    let hint = name_hints_time(column_name);
    let mut null_count = 0usize;
    let mut numbers = Vec::with_capacity(values.len());
    let mut times = Vec::with_capacity(values.len());
    let (mut n_num, mut n_time) = (0usize, 0usize);
    for v in values {
        if is_null(v, config) {
            null_count += 1;
            numbers.push(None);
            times.push(None);
            continue;
        }
        let t = parse_timestamp(v, hint);
        let n = parse_number(v);
        n_time += t.is_some() as usize;
        n_num += n.is_some() as usize;
        times.push(t);
        numbers.push(n);
    }
    let non_null = values.len() - null_count;
    let null_fraction = if values.is_empty() {
        0.0
    } else {
        null_count as f64 / values.len() as f64
    };
    let passes = |k: usize| non_null > 0 && k as f64 >= config.type_threshold * non_null as f64;

    let (column_type, parsed) = if passes(n_time) {
        (ColumnType::Temporal, ParsedValues::Timestamps(times))
    } else if passes(n_num) {
        (ColumnType::Numerical, ParsedValues::Numbers(numbers))
    } else {
        (ColumnType::Categorical, text_values(values, config))
    };
    DetectedColumn {
        column_type,
        parsed,
        null_fraction,
        null_count,
    }
}

/// Parses a column under a forced type (user overrides): unparseable cells
/// become `None`.
pub fn parse_as(
    values: &[String],
    column_name: &str,
    ty: ColumnType,
    config: &ProfilerConfig,
) -> ParsedValues {
    let hint = name_hints_time(column_name);
    match ty {
        ColumnType::Temporal => ParsedValues::Timestamps(
            values
                .iter()
                .map(|v| {
                    if is_null(v, config) {
                        None
                    } else {
                        // A forced temporal column accepts bare years and epochs too.
                        parse_timestamp(v, hint).or_else(|| parse_timestamp(v, true))
                    }
                })
                .collect(),
        ),
        ColumnType::Numerical | ColumnType::SpatialLatitude | ColumnType::SpatialLongitude => {
            ParsedValues::Numbers(
                values
                    .iter()
                    .map(|v| {
                        if is_null(v, config) {
                            None
                        } else {
                            parse_number(v)
                        }
                    })
                    .collect(),
            )
        }
        ColumnType::Categorical => text_values(values, config),
    }
}

fn text_values(values: &[String], config: &ProfilerConfig) -> ParsedValues {
    ParsedValues::Text(
        values
            .iter()
            .map(|v| {
                if is_null(v, config) {
                    None
                } else {
                    Some(v.trim().to_string())
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn threshold_is_inclusive() {
        let cfg = ProfilerConfig::default();
        let d = detect_column_type(
            &strings(&["1", "2", "x", "4", "5", "6", "7", "8", "9", "10"]),
            "v",
            &cfg,
        );
        assert_eq!(d.column_type, ColumnType::Numerical);
    }

    #[test]
    fn month_strings_are_temporal() {
        let cfg = ProfilerConfig::default();
        let d = detect_column_type(&strings(&["2020-01", "2020-02", "2020-03"]), "period", &cfg);
        assert_eq!(d.column_type, ColumnType::Temporal);
    }

    #[test]
    fn colors_are_categorical() {
        let cfg = ProfilerConfig::default();
        let d = detect_column_type(&strings(&["red", "green", "blue"]), "color", &cfg);
        assert_eq!(d.column_type, ColumnType::Categorical);
        assert_eq!(d.null_fraction, 0.0);
    }

    #[test]
    fn all_null_is_categorical_with_full_null_fraction() {
        let cfg = ProfilerConfig::default();
        let d = detect_column_type(
            &strings(&["", "NA", "null", " n/a ", "-", "None"]),
            "x",
            &cfg,
        );
        assert_eq!(d.column_type, ColumnType::Categorical);
        assert_eq!(d.null_fraction, 1.0);
    }

    #[test]
    fn nulls_excluded_from_ratio() {
        let cfg = ProfilerConfig::default();
        let d = detect_column_type(&strings(&["1", "", "", "", "2"]), "x", &cfg);
        assert_eq!(d.column_type, ColumnType::Numerical);
        assert_eq!(d.null_count, 3);
    }

    #[test]
    fn number_parsing() {
        assert_eq!(parse_number(" 3.5 "), Some(3.5));
        assert_eq!(parse_number("+2"), Some(2.0));
        assert_eq!(parse_number("1e3"), Some(1000.0));
        assert_eq!(parse_number("nan"), None);
        assert_eq!(parse_number("inf"), None);
        assert_eq!(parse_number("0x10"), None);
    }

    proptest! {
        #[test]
        fn numerical_iff_ratio_meets_threshold(n in 1usize..60, k_frac in 0.0f64..=1.0, nulls in 0usize..5) {
            let k = ((n as f64) * k_frac).round() as usize;
            let mut cells: Vec<String> = (0..k).map(|i| i.to_string()).collect();
            cells.extend((k..n).map(|i| format!("w{i}")));
            cells.extend((0..nulls).map(|_| String::new()));
            let cfg = ProfilerConfig::default();
            let d = detect_column_type(&cells, "v", &cfg);
            let expect = k as f64 / n as f64 >= 0.90;
            prop_assert_eq!(d.column_type == ColumnType::Numerical, expect);
            prop_assert_eq!(d.null_count, nulls);
            prop_assert!((d.null_fraction * cells.len() as f64 - nulls as f64).abs() < 1e-9);
        }
    }
}
