use std::sync::{Arc, Mutex, RwLock};

use dsearch_core::config::EngineConfig;
use dsearch_core::index::{self, IndexError, IndexShard};
use dsearch_core::ingest::{DatasetCache, PluginRegistry};
use dsearch_core::profiler::DatasetProfile;
use dsearch_core::search::Gazetteer;

/// Shared server state. Readers take a cheap snapshot of the current index;
/// writers serialize on `writer`, build a new shard and swap it in.
pub struct AppState {
    pub config: EngineConfig,
    pub cache: DatasetCache,
    pub plugins: PluginRegistry,
    pub gazetteer: &'static Gazetteer,
    index: RwLock<Arc<IndexShard>>,
    writer: Mutex<()>,
    persist: bool,
}

impl AppState {
    /// Loads the index from `config.index_path`, starting empty when none
    /// has been written yet.
    pub fn open(config: EngineConfig) -> Result<Self, IndexError> {
        let shard = match index::load(&config.index_path) {
            Ok(s) => s,
            Err(IndexError::EmptyIndex(_)) => {
                log::info!(
                    "no index at {}, starting empty",
                    config.index_path.display()
                );
                IndexShard::new(config.lsh)
            }
            Err(e) => return Err(e),
        };
        Ok(Self::build(config, shard, true))
    }

    /// State over an in-memory index that is never written to disk.
    pub fn in_memory(config: EngineConfig, shard: IndexShard) -> Self {
        Self::build(config, shard, false)
    }

    fn build(config: EngineConfig, shard: IndexShard, persist: bool) -> Self {
        AppState {
            cache: DatasetCache::new(&config.cache_path, config.cache_cap_bytes),
            plugins: config.build_plugins(),
            gazetteer: Gazetteer::bundled(),
            index: RwLock::new(Arc::new(shard)),
            writer: Mutex::new(()),
            persist,
            config,
        }
    }

    pub fn snapshot(&self) -> Arc<IndexShard> {
        self.index.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Adds `profile` unless its id is already present, in which case the
    /// existing id is returned as the error.
    pub fn insert(&self, profile: DatasetProfile) -> Result<Result<(), String>, IndexError> {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.snapshot();
        if current.contains(&profile.id) {
            return Ok(Err(profile.id));
        }
        let mut next = (*current).clone();
        next.add_dataset(profile)?;
        if self.persist {
            index::persist(&next, &self.config.index_path)?;
        }
        *self.index.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        Ok(Ok(()))
    }
}
