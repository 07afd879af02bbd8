//! Dataset discovery, caching and re-materialization.

pub mod cache;
pub mod plugin;
pub mod provenance;
pub mod socrata;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

pub use cache::{CachePut, DatasetCache, DEFAULT_CACHE_CAP_BYTES};
pub use plugin::{
    is_csv, DiscoveryPlugin, FetchedDataset, IngestError, ListingEntry, LocalDirPlugin,
    SIDECAR_SUFFIX,
};
pub use provenance::{content_hash, ProvenanceRecord};
pub use socrata::{SocrataConfig, SocrataPlugin};

use crate::index::IndexShard;
use crate::profiler::profile::dataset_id;
use crate::profiler::{profile_table, DatasetMeta, ProfilerConfig, TableData};

pub const DEFAULT_FETCH_WORKERS: usize = 4;

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every slot filled")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub description: String,
    pub source: String,
    pub bytes: Vec<u8>,
    pub provenance: ProvenanceRecord,
    pub cache_hit: bool,
}

impl RawDataset {
    pub fn id(&self) -> String {
        dataset_id(&self.provenance.content_hash)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub locator: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct Discovery {
    pub datasets: Vec<RawDataset>,
    pub skipped: Vec<Skipped>,
    pub failed: Vec<(String, IngestError)>,
}

fn csv_entries(
    plugin: &dyn DiscoveryPlugin,
    limit: Option<usize>,
    skipped: &mut Vec<Skipped>,
) -> Result<Vec<ListingEntry>, IngestError> {
    const PAGE: usize = 100;
    let mut out = Vec::new();
    let mut offset = 0;
    while limit.is_none_or(|l| out.len() < l) {
        let page = plugin.list_page(offset, PAGE)?;
        let n = page.entries.len();
        offset += n;
        for e in page.entries {
            if limit.is_some_and(|l| out.len() >= l) {
                break;
            }
            if is_csv(e.format.as_deref(), None) {
                out.push(e);
            } else {
                log::info!("skipping {}: not a CSV listing", e.locator);
                skipped.push(Skipped {
                    reason: format!("unsupported format '{}'", e.format.unwrap_or_default()),
                    locator: e.locator,
                });
            }
        }
        if n == 0 || page.total.is_some_and(|t| offset >= t) {
            break;
        }
    }
    Ok(out)
}

/// Lists up to `limit` CSV datasets from `plugin`, fetches them on a pool
/// of `workers` threads and stores each in `cache`. Fetch failures of single
/// datasets are reported in `failed`; the call itself fails when listing
/// fails or when every fetch failed because the plugin is unavailable.
pub fn discover(
    plugin: &dyn DiscoveryPlugin,
    cache: &DatasetCache,
    limit: Option<usize>,
    workers: usize,
) -> Result<Discovery, IngestError> {
    let mut out = Discovery::default();
    let entries = csv_entries(plugin, limit, &mut out.skipped)?;
    let fetched = parallel_map(
        &entries,
        workers,
        |e| -> Result<Option<RawDataset>, IngestError> {
            let f = plugin.fetch(&e.locator)?;
            if !is_csv(None, f.content_type.as_deref()) {
                return Ok(None);
            }
            let put = cache.put(&f.bytes)?;
            let mut provenance = ProvenanceRecord::for_bytes(plugin.name(), &e.locator, &f.bytes);
            provenance.content_hash = put.hash;
            Ok(Some(RawDataset {
                name: f
                    .name
                    .filter(|n| !n.is_empty())
                    .unwrap_or_else(|| e.title.clone()),
                description: f
                    .description
                    .filter(|d| !d.is_empty())
                    .unwrap_or_else(|| e.description.clone()),
                source: plugin.name().to_string(),
                bytes: f.bytes,
                provenance,
                cache_hit: put.hit,
            }))
        },
    );
    for (e, r) in entries.iter().zip(fetched) {
        match r {
            Ok(Some(d)) => out.datasets.push(d),
            Ok(None) => {
                log::info!("skipping {}: payload is not CSV", e.locator);
                out.skipped.push(Skipped {
                    locator: e.locator.clone(),
                    reason: "payload is not CSV".into(),
                });
            }
            Err(err) => {
                log::warn!("fetching {} failed: {err}", e.locator);
                out.failed.push((e.locator.clone(), err));
            }
        }
    }
    if out.datasets.is_empty() {
        if let Some((_, err @ IngestError::PluginUnavailable { .. })) = out.failed.first() {
            if out
                .failed
                .iter()
                .all(|(_, e)| matches!(e, IngestError::PluginUnavailable { .. }))
            {
                return Err(err.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Default, Clone)]
pub struct PluginRegistry {
    plugins: BTreeMap<String, Arc<dyn DiscoveryPlugin>>,
}

impl std::fmt::Debug for PluginRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.plugins.keys()).finish()
    }
}

impl PluginRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, plugin: Arc<dyn DiscoveryPlugin>) {
        self.plugins.insert(plugin.name().to_string(), plugin);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn DiscoveryPlugin>> {
        self.plugins.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.plugins.keys().map(String::as_str)
    }
}

/// Returns the dataset's bytes, from the cache when possible and otherwise
/// re-fetched through the recorded plugin. Re-fetched bytes must hash to the
/// recorded content hash.
pub fn materialize_bytes(
    provenance: &ProvenanceRecord,
    cache: &DatasetCache,
    plugins: &PluginRegistry,
) -> Result<Vec<u8>, IngestError> {
    if let Some(bytes) = cache.get(&provenance.content_hash)? {
        return Ok(bytes);
    }
    let plugin = plugins.get(&provenance.source_plugin).ok_or_else(|| {
        IngestError::SourceGone(format!(
            "{} (plugin {})",
            provenance.locator, provenance.source_plugin
        ))
    })?;
    let fetched = plugin.fetch(&provenance.locator)?;
    let found = content_hash(&fetched.bytes);
    if found != provenance.content_hash {
        return Err(IngestError::HashMismatch {
            locator: provenance.locator.clone(),
            expected: provenance.content_hash.clone(),
            found,
        });
    }
    cache.put(&fetched.bytes)?;
    Ok(fetched.bytes)
}

pub fn materialize(
    provenance: &ProvenanceRecord,
    cache: &DatasetCache,
    plugins: &PluginRegistry,
) -> Result<TableData, IngestError> {
    let bytes = materialize_bytes(provenance, cache, plugins)?;
    TableData::from_csv_bytes(&bytes).map_err(|e| IngestError::Table(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IngestStatus {
    Indexed {
        id: String,
    },
    /// Already in the index with the same content.
    Unchanged {
        id: String,
    },
    Failed {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestOutcome {
    pub locator: String,
    pub name: String,
    #[serde(flatten)]
    pub status: IngestStatus,
}

/// Profiles the datasets not yet in `index` (in parallel) and adds them.
/// Datasets whose content is already indexed are left untouched, so running
/// twice over an unchanged source leaves the index as it was.
pub fn index_datasets(
    index: &mut IndexShard,
    datasets: &[RawDataset],
    config: &ProfilerConfig,
    workers: usize,
) -> Vec<IngestOutcome> {
    let mut seen = BTreeSet::new();
    let fresh: Vec<&RawDataset> = datasets
        .iter()
        .filter(|d| !index.contains(&d.id()) && seen.insert(d.id()))
        .collect();
    let profiles = parallel_map(&fresh, workers, |d| {
        let table = TableData::from_csv_bytes(&d.bytes).map_err(|e| e.to_string())?;
        let meta = DatasetMeta {
            name: d.name.clone(),
            description: d.description.clone(),
            source: d.source.clone(),
            provenance: Some(d.provenance.clone()),
            custom_metadata: BTreeMap::new(),
        };
        profile_table(&table, config, meta).map_err(|e| e.to_string())
    });
    let mut by_locator: BTreeMap<&str, Result<_, String>> = BTreeMap::new();
    for (d, p) in fresh.iter().zip(profiles) {
        by_locator.insert(d.provenance.locator.as_str(), p);
    }
    datasets
        .iter()
        .map(|d| {
            let id = d.id();
            let status = match by_locator.remove(d.provenance.locator.as_str()) {
                Some(Ok(profile)) => match index.add_dataset(profile) {
                    Ok(_) => IngestStatus::Indexed { id },
                    Err(e) => IngestStatus::Failed {
                        reason: e.to_string(),
                    },
                },
                Some(Err(reason)) => IngestStatus::Failed { reason },
                None => IngestStatus::Unchanged { id },
            };
            IngestOutcome {
                locator: d.provenance.locator.clone(),
                name: d.name.clone(),
                status,
            }
        })
        .collect()
}
