use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dsearch_core::augment::{augment, AugmentationSpec};
use dsearch_core::config::{ConfigError, EngineConfig};
use dsearch_core::demo::run_bicycle_demo;
use dsearch_core::index::{self, IndexError, IndexShard};
use dsearch_core::ingest::{
    discover, index_datasets, materialize, DatasetCache, DiscoveryPlugin, IngestError,
    IngestStatus, LocalDirPlugin, ProvenanceRecord,
};
use dsearch_core::profiler::{
    profile_table_with_overrides, ColumnType, DatasetMeta, DatasetProfile, ProfileError, TableData,
};
use dsearch_core::search::{
    execute_query, join_search, union_candidate, Augmentation, BoundingBox, Gazetteer, Page, Query,
    RelatedQuery, SpatialFilter, TemporalFilter, Timestamp,
};
use serde_json::json;

use crate::output;
use crate::{AugmentArgs, Cli, Command, Demo, IngestArgs, ProfileArgs, SearchArgs, ServeArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{message}")]
    Data { code: &'static str, message: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn data(code: &'static str, message: impl ToString) -> Self {
        CliError::Data {
            code,
            message: message.to_string(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Config(_) => "Config",
            CliError::Data { code, .. } => code,
            CliError::Runtime(_) => "Runtime",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::data(e.code(), e)
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::data(e.code(), e)
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        CliError::data("IndexError", e)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Profile(a) => profile(cli, a),
        Command::Search(a) => search(cli, a),
        Command::Augment(a) => augment_cmd(cli, a),
        Command::Stats => stats(cli),
        Command::Demo {
            demo: Demo::Bicycle { seed, runs },
        } => demo(cli, *seed, *runs),
        Command::Serve(a) => serve(cli, a),
    }
}

fn load_config(cli: &Cli) -> Result<EngineConfig, CliError> {
    match &cli.config {
        Some(p) => Ok(EngineConfig::load(p)?),
        None => {
            let mut c = EngineConfig::default();
            c.apply_overrides(|k| std::env::var(k).ok());
            Ok(c)
        }
    }
}

fn load_index(config: &EngineConfig) -> Result<IndexShard, CliError> {
    match index::load(&config.index_path) {
        Ok(s) => Ok(s),
        Err(IndexError::EmptyIndex(_)) => Ok(IndexShard::new(config.lsh)),
        Err(e) => Err(e.into()),
    }
}

fn cache(config: &EngineConfig) -> DatasetCache {
    DatasetCache::new(&config.cache_path, config.cache_cap_bytes)
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path)
        .map_err(|e| CliError::data("Io", format!("cannot read {}: {e}", path.display())))
}

fn read_table(path: &Path) -> Result<(Vec<u8>, TableData), CliError> {
    let bytes = read_file(path)?;
    let table = TableData::from_csv_bytes(&bytes)
        .map_err(|e| CliError::data(e.code(), format!("{}: {e}", path.display())))?;
    Ok((bytes, table))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn profile_file(
    path: &Path,
    config: &EngineConfig,
    overrides: &BTreeMap<String, ColumnType>,
) -> Result<(TableData, DatasetProfile), CliError> {
    let (bytes, table) = read_table(path)?;
    let meta = DatasetMeta {
        name: stem(path),
        source: "local".into(),
        provenance: Some(ProvenanceRecord::for_bytes(
            "local",
            &path.to_string_lossy(),
            &bytes,
        )),
        ..Default::default()
    };
    let profile = profile_table_with_overrides(&table, &config.profiler, meta, overrides)?;
    Ok((table, profile))
}

fn ingest(cli: &Cli, args: &IngestArgs) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let registry = config.build_plugins();
    let mut plugins: Vec<Arc<dyn DiscoveryPlugin>> = match &args.plugin {
        Some(name) => vec![registry
            .get(name)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("no plugin named '{name}' in the config")))?],
        None => registry
            .names()
            .filter_map(|n| registry.get(n).cloned())
            .collect(),
    };
    if let Some(dir) = &args.dir {
        plugins.push(Arc::new(LocalDirPlugin::new("local", dir)));
    }
    if plugins.is_empty() {
        return Err(CliError::Usage(
            "no plugins configured; add [[plugins]] to the config or pass --dir".into(),
        ));
    }
    let cache = cache(&config);
    let mut index = load_index(&config)?;
    let mut outcomes = Vec::new();
    let mut skipped = Vec::new();
    let mut plugin_errors = Vec::new();
    for plugin in &plugins {
        match discover(plugin.as_ref(), &cache, args.limit, config.fetch_workers) {
            Ok(found) => {
                outcomes.extend(index_datasets(
                    &mut index,
                    &found.datasets,
                    &config.profiler,
                    config.fetch_workers,
                ));
                skipped.extend(found.skipped);
                for (locator, err) in found.failed {
                    outcomes.push(dsearch_core::ingest::IngestOutcome {
                        name: locator.clone(),
                        locator,
                        status: IngestStatus::Failed {
                            reason: err.to_string(),
                        },
                    });
                }
            }
            Err(e) => plugin_errors.push((plugin.name().to_string(), e)),
        }
    }
    index::persist(&index, &config.index_path)?;
    let count = |f: fn(&IngestStatus) -> bool| outcomes.iter().filter(|o| f(&o.status)).count();
    let indexed = count(|s| matches!(s, IngestStatus::Indexed { .. }));
    let unchanged = count(|s| matches!(s, IngestStatus::Unchanged { .. }));
    let failed = count(|s| matches!(s, IngestStatus::Failed { .. }));
    if cli.json {
        output::print_json(&json!({
            "indexed": indexed,
            "unchanged": unchanged,
            "failed": failed,
            "datasets": outcomes,
            "skipped": skipped,
            "plugin_errors": plugin_errors.iter().map(|(p, e)| json!({"plugin": p, "code": e.code(), "message": e.to_string()})).collect::<Vec<_>>(),
            "index_size": index.len(),
        }));
    } else {
        for o in &outcomes {
            match &o.status {
                IngestStatus::Indexed { id } => println!("indexed   {id}  {}", o.name),
                IngestStatus::Unchanged { id } => println!("unchanged {id}  {}", o.name),
                IngestStatus::Failed { reason } => println!("failed    {}: {reason}", o.locator),
            }
        }
        for s in &skipped {
            println!("skipped   {}: {}", s.locator, s.reason);
        }
        for (p, e) in &plugin_errors {
            println!("plugin {p} failed: {e}");
        }
        println!(
            "indexed {indexed}, unchanged {unchanged}, failed {failed}; index holds {} datasets",
            index.len()
        );
    }
    match plugin_errors.into_iter().next() {
        Some((_, e)) if indexed + unchanged == 0 => Err(e.into()),
        _ => Ok(()),
    }
}

fn parse_overrides(specs: &[String]) -> Result<BTreeMap<String, ColumnType>, CliError> {
    specs
        .iter()
        .map(|s| {
            let (col, ty) = s
                .rsplit_once('=')
                .ok_or_else(|| CliError::Usage(format!("--type expects COLUMN=TYPE, got '{s}'")))?;
            let ty = ty
                .parse::<ColumnType>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            Ok((col.to_string(), ty))
        })
        .collect()
}

fn profile(cli: &Cli, args: &ProfileArgs) -> Result<(), CliError> {
    let overrides = parse_overrides(&args.overrides)?;
    let config = load_config(cli)?;
    let (_, p) = profile_file(&args.csv, &config, &overrides)?;
    if cli.json {
        output::print_json(&p);
    } else {
        output::print_profile(&p);
    }
    Ok(())
}

fn timestamp(s: &str) -> Result<Timestamp, CliError> {
    Timestamp::parse(s).ok_or_else(|| CliError::Usage(format!("unrecognized timestamp '{s}'")))
}

fn parse_bbox(s: &str) -> Result<BoundingBox, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--bbox expects four numbers, got '{s}'")))?;
    match v[..] {
        [a, b, c, d] => Ok(BoundingBox {
            min: [a, b],
            max: [c, d],
        }),
        _ => Err(CliError::Usage(format!(
            "--bbox expects lat_min,lon_min,lat_max,lon_max, got '{s}'"
        ))),
    }
}

// Far enough apart to cover any calendar date.
const EARLIEST: Timestamp = Timestamp(-62_135_596_800);
const LATEST: Timestamp = Timestamp(253_402_300_799);

fn build_query(args: &SearchArgs, config: &EngineConfig) -> Result<Query, CliError> {
    let mut q = match &args.query {
        Some(path) => {
            let text = read_file(path)?;
            serde_json::from_slice::<Query>(&text).map_err(|e| CliError::data("InvalidQuery", e))?
        }
        None => Query {
            keywords: args.keywords.clone(),
            temporal: match (&args.after, &args.before) {
                (None, None) => None,
                (a, b) => Some(TemporalFilter {
                    start: a.as_deref().map(timestamp).transpose()?.unwrap_or(EARLIEST),
                    end: b.as_deref().map(timestamp).transpose()?.unwrap_or(LATEST),
                    resolution: None,
                }),
            },
            spatial: match (&args.bbox, &args.area) {
                (Some(b), _) => Some(SpatialFilter::Bbox(parse_bbox(b)?)),
                (None, Some(a)) => Some(SpatialFilter::NamedArea(a.clone())),
                (None, None) => None,
            },
            sources: (!args.source.is_empty()).then(|| args.source.iter().cloned().collect()),
            required_types: (!args.types.is_empty()).then(|| args.types.iter().copied().collect()),
            related: None,
            page: Page {
                offset: args.offset,
                limit: args.limit,
            },
        },
    };
    if let Some(path) = &args.related {
        let (_, profile) = profile_file(path, config, &BTreeMap::new())?;
        q.related = Some(RelatedQuery {
            profile,
            mode: args.mode,
        });
    }
    Ok(q)
}

fn search(cli: &Cli, args: &SearchArgs) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let q = build_query(args, &config)?;
    let index = load_index(&config)?;
    let page = execute_query(&q, &index, &config.weights, Gazetteer::bundled()).map_err(|e| {
        if matches!(e, dsearch_core::search::SearchError::EmptyQuery) {
            CliError::Usage(format!("{e}; pass --keywords, a filter or --related"))
        } else {
            CliError::data(e.code(), e)
        }
    })?;
    if cli.json {
        output::print_json(&page);
    } else {
        output::print_results(&page, q.page.offset, args.explain);
    }
    Ok(())
}

fn derive_spec(
    left: &DatasetProfile,
    right: &DatasetProfile,
    index: &IndexShard,
) -> Result<AugmentationSpec, CliError> {
    if let Some(j) = join_search(left, index)
        .into_iter()
        .find(|c| c.dataset_id == right.id)
    {
        return Ok(AugmentationSpec::from_augmentation(&Augmentation::Join(j)));
    }
    if let Some(u) = union_candidate(left, right) {
        return Ok(AugmentationSpec::from_augmentation(&Augmentation::Union(u)));
    }
    Err(CliError::data(
        "NoCandidate",
        format!(
            "'{}' is neither joinable nor unionable with the left table; pass --spec",
            right.id
        ),
    ))
}

fn augment_cmd(cli: &Cli, args: &AugmentArgs) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let index = load_index(&config)?;
    let cache = cache(&config);
    let plugins = config.build_plugins();
    let right = index.get(&args.right_id).ok_or_else(|| {
        CliError::data(
            "NotFound",
            format!("no dataset with id '{}'", args.right_id),
        )
    })?;
    let (left_table, left_profile, left_id) = match (&args.left, &args.left_id) {
        (Some(path), _) => {
            let (table, profile) = profile_file(path, &config, &BTreeMap::new())?;
            let id = profile.id.clone();
            (table, profile, id)
        }
        (None, Some(id)) => {
            let p = index
                .get(id)
                .ok_or_else(|| CliError::data("NotFound", format!("no dataset with id '{id}'")))?;
            (
                materialize(&p.provenance, &cache, &plugins)?,
                p.clone(),
                id.clone(),
            )
        }
        (None, None) => return Err(CliError::Usage("pass --left or --left-id".into())),
    };
    let spec = match &args.spec {
        Some(path) => serde_json::from_slice::<AugmentationSpec>(&read_file(path)?)
            .map_err(|e| CliError::data("InvalidSpec", format!("{}: {e}", path.display())))?,
        None => derive_spec(&left_profile, right, &index)?,
    };
    let right_table = materialize(&right.provenance, &cache, &plugins)?;
    let mut result =
        augment(&left_table, &right_table, &spec).map_err(|e| CliError::data(e.code(), e))?;
    result.provenance.left_id = left_id;
    result.provenance.right_id = args.right_id.clone();
    let csv = result.table.to_csv_bytes();
    let provenance_path = args.out.as_ref().map(|o| {
        let mut p = o.clone().into_os_string();
        p.push(".provenance.json");
        PathBuf::from(p)
    });
    if let (Some(out), Some(pp)) = (&args.out, &provenance_path) {
        let write = |path: &Path, bytes: &[u8]| {
            std::fs::write(path, bytes)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
        };
        write(out, &csv)?;
        write(
            pp,
            serde_json::to_string_pretty(&result.provenance)
                .expect("serializes")
                .as_bytes(),
        )?;
    }
    if cli.json {
        output::print_json(&json!({
            "output": args.out,
            "provenance_file": provenance_path,
            "provenance": result.provenance,
            "csv": if args.out.is_none() { Some(String::from_utf8_lossy(&csv)) } else { None },
        }));
    } else if let Some(out) = &args.out {
        println!(
            "wrote {} rows x {} columns to {}",
            result.table.row_count(),
            result.table.columns().len(),
            out.display()
        );
    } else {
        use std::io::Write;
        let _ = std::io::stdout().write_all(&csv);
        eprintln!(
            "{}",
            serde_json::to_string(&result.provenance).expect("serializes")
        );
    }
    Ok(())
}

fn stats(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let index = load_index(&config)?;
    let mut per_source: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    for p in index.profiles() {
        *per_source.entry(&p.source).or_default() += 1;
        for c in &p.columns {
            *per_type.entry(c.effective_type().as_str()).or_default() += 1;
        }
    }
    if cli.json {
        output::print_json(
            &json!({"dataset_count": index.len(), "per_source": per_source, "per_type": per_type}),
        );
    } else {
        println!("datasets: {}", index.len());
        for (s, n) in &per_source {
            println!("  source {s}: {n}");
        }
        for (t, n) in &per_type {
            println!("  {t} columns: {n}");
        }
    }
    Ok(())
}

fn demo(cli: &Cli, seed: u64, runs: u64) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for s in seed..seed.saturating_add(runs.max(1)) {
        let r = run_bicycle_demo(s).map_err(|e| CliError::data("DemoFailed", e))?;
        if !cli.json {
            output::print_demo(&r);
        }
        reports.push(r);
    }
    if cli.json {
        if reports.len() == 1 {
            output::print_json(&reports[0]);
        } else {
            output::print_json(&reports);
        }
    }
    Ok(())
}

fn serve(cli: &Cli, args: &ServeArgs) -> Result<(), CliError> {
    let mut config = load_config(cli)?;
    if let Some(l) = &args.listen {
        config.listen = l.clone();
    }
    let listen = config.listen.clone();
    let state = Arc::new(dsearch_service::AppState::open(config)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&listen)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot listen on {listen}: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        if cli.json {
            output::print_json(&json!({"listening": format!("http://{addr}")}));
        } else {
            println!("listening on http://{addr}");
        }
        dsearch_service::serve(state, listener)
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })
}
