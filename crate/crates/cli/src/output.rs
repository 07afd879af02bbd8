use dsearch_core::demo::BicycleReport;
use dsearch_core::profiler::DatasetProfile;
use dsearch_core::search::{Augmentation, PairKind, SearchPage};
use dsearch_core::sketches::ColumnSummary;
use serde::Serialize;

pub fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn summary_text(s: &ColumnSummary) -> String {
    match s {
        ColumnSummary::Numeric(r) => format!("{} ranges", r.ranges.len()),
        ColumnSummary::Temporal(t) => {
            format!("{} ranges @ {}", t.summary.ranges.len(), t.resolution)
        }
        ColumnSummary::Categorical(m) => format!("minhash x{}", m.len()),
    }
}

pub fn print_profile(p: &DatasetProfile) {
    println!("{}  {}", p.id, p.name);
    println!("{} rows, {} columns", p.row_count, p.columns.len());
    let width = p
        .columns
        .iter()
        .map(|c| c.name.chars().count())
        .max()
        .unwrap_or(4)
        .max(6);
    println!(
        "{:<width$}  {:<18} {:>6} {:>9}  summary",
        "column", "type", "nulls", "distinct"
    );
    for c in &p.columns {
        let ty = match c.user_type_override {
            Some(t) => format!("{t} (was {})", c.detected_type),
            None => c.detected_type.to_string(),
        };
        println!(
            "{:<width$}  {:<18} {:>5.1}% {:>9}  {}",
            c.name,
            ty,
            c.null_fraction * 100.0,
            c.distinct_count_estimate,
            summary_text(&c.summary)
        );
    }
    for s in &p.spatial_coverage {
        println!(
            "spatial: ({}, {}) in {} boxes",
            s.latitude,
            s.longitude,
            s.summary.boxes.len()
        );
    }
}

fn kind(k: PairKind) -> &'static str {
    match k {
        PairKind::Categorical => "categorical",
        PairKind::Numeric => "numeric",
        PairKind::Temporal => "temporal",
        PairKind::Spatial => "spatial",
    }
}

fn match_summary(a: &Augmentation) -> String {
    match a {
        Augmentation::Join(j) => {
            let pairs: Vec<String> = j
                .pairs
                .iter()
                .map(|p| {
                    format!(
                        "{}={} ({} {:.2})",
                        p.query_column,
                        p.candidate_column,
                        kind(p.kind),
                        p.containment_score
                    )
                })
                .collect();
            format!("join on {}", pairs.join(", "))
        }
        Augmentation::Union(u) => {
            format!(
                "union {} columns matched ({:.0}%)",
                u.column_pairs.len(),
                u.matched_fraction * 100.0
            )
        }
    }
}

pub fn print_results(page: &SearchPage, offset: usize, explain: bool) {
    println!("{} matching datasets", page.total);
    for (i, r) in page.results.iter().enumerate() {
        println!(
            "{:>3}. {:.4}  {}  {} [{}]",
            offset + i + 1,
            r.total_score,
            r.dataset_id,
            r.snippet.name,
            r.snippet.source
        );
        if let Some(a) = &r.augmentation {
            println!("       {}", match_summary(a));
        }
        if explain {
            let b = &r.score_breakdown;
            let mut parts = Vec::new();
            if let (Some(k), Some(bm)) = (b.keyword, b.keyword_bm25) {
                parts.push(format!("keyword {k:.4} (bm25 {bm:.3})"));
            }
            if let Some(f) = b.filter_overlap {
                parts.push(format!("filters {f:.4}"));
            }
            if let Some(j) = b.join {
                parts.push(format!("join {j:.4}"));
            }
            if let Some(u) = b.union {
                parts.push(format!("union {u:.4}"));
            }
            println!("       score: {}", parts.join(", "));
        }
    }
}

pub fn print_demo(r: &BicycleReport) {
    println!(
        "seed {}: R2 {:.3} ({} rows) -> {:.3} after union with '{}' ({} rows) -> {:.3} after join with '{}'",
        r.seed,
        r.r2_before,
        r.rows_before,
        r.r2_after_union,
        r.union_dataset,
        r.rows_after_union,
        r.r2_after_join,
        r.join_dataset
    );
}
