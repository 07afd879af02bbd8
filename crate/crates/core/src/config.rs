//! Engine configuration, read from a TOML file.
//!
//! ```toml
//! index_path = "data/index"
//! cache_path = "data/cache"
//! listen = "127.0.0.1:8080"
//!
//! [profiler]
//! summary_k = 5
//!
//! [weights]
//! keyword = 0.5
//!
//! [[plugins]]
//! name = "local"
//! type = "local_dir"
//! path = "datasets"
//!
//! [[custom_metadata_fields]]
//! name = "license"
//! type = "enum"
//! required = true
//! enum_values = ["cc0", "cc-by"]
//! ```
//!
//! Relative paths are resolved against the config file's directory.
//! `ENGINE_LISTEN` and `ENGINE_INDEX_PATH` override the file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::index::LshParams;
use crate::ingest::{
    LocalDirPlugin, PluginRegistry, SocrataConfig, SocrataPlugin, DEFAULT_CACHE_CAP_BYTES,
};
use crate::profiler::ProfilerConfig;
use crate::search::SearchWeights;

pub const ENV_LISTEN: &str = "ENGINE_LISTEN";
pub const ENV_INDEX_PATH: &str = "ENGINE_INDEX_PATH";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PluginKind {
    LocalDir {
        path: PathBuf,
    },
    Socrata {
        base_url: String,
        #[serde(default = "default_page_size")]
        page_size: usize,
        #[serde(default)]
        app_token: Option<String>,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
}

fn default_page_size() -> usize {
    100
}

fn default_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: PluginKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    String,
    Number,
    Enum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomField {
    pub name: String,
    #[serde(rename = "type")]
    pub field_type: FieldType,
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enum_values: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub index_path: PathBuf,
    pub cache_path: PathBuf,
    pub cache_cap_bytes: u64,
    pub listen: String,
    pub fetch_workers: usize,
    /// Allowed CORS origins; `"*"` allows any.
    pub cors_origins: Vec<String>,
    pub lsh: LshParams,
    pub profiler: ProfilerConfig,
    pub weights: SearchWeights,
    pub plugins: Vec<PluginConfig>,
    pub custom_metadata_fields: Vec<CustomField>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            index_path: PathBuf::from("data/index"),
            cache_path: PathBuf::from("data/cache"),
            cache_cap_bytes: DEFAULT_CACHE_CAP_BYTES,
            listen: "127.0.0.1:8080".into(),
            fetch_workers: crate::ingest::DEFAULT_FETCH_WORKERS,
            cors_origins: vec!["*".into()],
            lsh: LshParams::default(),
            profiler: ProfilerConfig::default(),
            weights: SearchWeights::default(),
            plugins: Vec::new(),
            custom_metadata_fields: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetadataViolation {
    pub field: String,
    pub reason: String,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: EngineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, resolves relative paths and applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.apply_overrides(|k| std::env::var(k).ok());
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.index_path);
        resolve(base, &mut self.cache_path);
        for p in &mut self.plugins {
            if let PluginKind::LocalDir { path } = &mut p.kind {
                resolve(base, path);
            }
        }
    }

    pub fn apply_overrides(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(v) = var(ENV_LISTEN).filter(|v| !v.is_empty()) {
            self.listen = v;
        }
        if let Some(v) = var(ENV_INDEX_PATH).filter(|v| !v.is_empty()) {
            self.index_path = PathBuf::from(v);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let w = &self.weights;
        if [w.keyword, w.filters, w.related]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return invalid("weights must be finite and nonnegative".into());
        }
        if w.keyword + w.filters + w.related <= 0.0 {
            return invalid("at least one weight must be positive".into());
        }
        if self.lsh.bands == 0 || self.lsh.rows == 0 {
            return invalid("lsh bands and rows must be positive".into());
        }
        if self.lsh.signature_len() != self.profiler.permutations {
            return invalid(format!(
                "lsh bands * rows ({}) must equal profiler.permutations ({})",
                self.lsh.signature_len(),
                self.profiler.permutations
            ));
        }
        if self.profiler.summary_k == 0 {
            return invalid("profiler.summary_k must be positive".into());
        }
        if !(self.profiler.type_threshold > 0.0 && self.profiler.type_threshold <= 1.0) {
            return invalid("profiler.type_threshold must be in (0, 1]".into());
        }
        let mut names = BTreeSet::new();
        for f in &self.custom_metadata_fields {
            if f.name.trim().is_empty() {
                return invalid("custom metadata field with empty name".into());
            }
            if !names.insert(f.name.as_str()) {
                return invalid(format!("duplicate custom metadata field '{}'", f.name));
            }
            match (f.field_type, &f.enum_values) {
                (FieldType::Enum, Some(v)) if !v.is_empty() => {}
                (FieldType::Enum, _) => {
                    return invalid(format!("enum field '{}' needs enum_values", f.name))
                }
                (_, Some(_)) => {
                    return invalid(format!(
                        "field '{}' has enum_values but is not an enum",
                        f.name
                    ))
                }
                _ => {}
            }
        }
        let mut plugins = BTreeSet::new();
        for p in &self.plugins {
            if !plugins.insert(p.name.as_str()) {
                return invalid(format!("duplicate plugin name '{}'", p.name));
            }
        }
        Ok(())
    }

    /// Checks user-supplied metadata against `custom_metadata_fields` and
    /// returns it as strings.
    pub fn validate_custom_metadata(
        &self,
        values: &BTreeMap<String, serde_json::Value>,
    ) -> Result<BTreeMap<String, String>, Vec<MetadataViolation>> {
        let mut out = BTreeMap::new();
        let mut errors = Vec::new();
        let mut violation = |field: &str, reason: String| {
            errors.push(MetadataViolation {
                field: field.to_string(),
                reason,
            })
        };
        for name in values.keys() {
            if !self.custom_metadata_fields.iter().any(|f| &f.name == name) {
                violation(name, "unknown field".into());
            }
        }
        for f in &self.custom_metadata_fields {
            let v = match values.get(&f.name) {
                None | Some(serde_json::Value::Null) => {
                    if f.required {
                        violation(&f.name, "required field missing".into());
                    }
                    continue;
                }
                Some(v) => v,
            };
            let text = match (f.field_type, v) {
                (FieldType::Number, serde_json::Value::Number(n)) => n.to_string(),
                (FieldType::Number, serde_json::Value::String(s))
                    if crate::profiler::parse_number(s).is_some() =>
                {
                    s.trim().to_string()
                }
                (FieldType::Number, _) => {
                    violation(&f.name, "expected a number".into());
                    continue;
                }
                (_, serde_json::Value::String(s)) => s.clone(),
                _ => {
                    violation(&f.name, "expected a string".into());
                    continue;
                }
            };
            if let (FieldType::Enum, Some(allowed)) = (f.field_type, &f.enum_values) {
                if !allowed.contains(&text) {
                    violation(
                        &f.name,
                        format!("'{text}' is not one of {}", allowed.join(", ")),
                    );
                    continue;
                }
            }
            out.insert(f.name.clone(), text);
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(errors)
        }
    }

    pub fn build_plugins(&self) -> PluginRegistry {
        let mut registry = PluginRegistry::new();
        for p in &self.plugins {
            match &p.kind {
                PluginKind::LocalDir { path } => {
                    registry.register(Arc::new(LocalDirPlugin::new(&p.name, path)))
                }
                PluginKind::Socrata {
                    base_url,
                    page_size,
                    app_token,
                    max_retries,
                } => {
                    let mut c = SocrataConfig::new(base_url);
                    c.page_size = *page_size;
                    c.app_token = app_token.clone();
                    c.max_retries = *max_retries;
                    c.timeout = Duration::from_secs(120);
                    registry.register(Arc::new(SocrataPlugin::new(&p.name, c)));
                }
            }
        }
        registry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const SAMPLE: &str = r#"
index_path = "idx"
listen = "0.0.0.0:9000"

[weights]
keyword = 1.0

[[plugins]]
name = "local"
type = "local_dir"
path = "datasets"

[[plugins]]
name = "nyc"
type = "socrata"
base_url = "http://localhost:1"

[[custom_metadata_fields]]
name = "license"
type = "enum"
required = true
enum_values = ["cc0", "cc-by"]

[[custom_metadata_fields]]
name = "rows_hint"
type = "number"
"#;

    #[test]
    fn parses_and_resolves() {
        let mut c = EngineConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.weights.keyword, 1.0);
        assert_eq!(c.weights.filters, 0.2);
        c.resolve_paths(Path::new("/etc/engine"));
        assert_eq!(c.index_path, PathBuf::from("/etc/engine/idx"));
        assert_eq!(
            c.plugins[0].kind,
            PluginKind::LocalDir {
                path: "/etc/engine/datasets".into()
            }
        );
        assert!(matches!(
            c.plugins[1].kind,
            PluginKind::Socrata { page_size: 100, .. }
        ));
        c.apply_overrides(|k| (k == ENV_LISTEN).then(|| "127.0.0.1:1".to_string()));
        assert_eq!(c.listen, "127.0.0.1:1");
        assert_eq!(c.index_path, PathBuf::from("/etc/engine/idx"));
        let names: Vec<_> = c.build_plugins().names().map(str::to_string).collect();
        assert_eq!(names, ["local", "nyc"]);
    }

    #[test]
    fn rejects_bad_configs() {
        let dup = "[[custom_metadata_fields]]\nname='a'\ntype='string'\n[[custom_metadata_fields]]\nname='a'\ntype='number'\n";
        assert!(matches!(
            EngineConfig::from_toml_str(dup),
            Err(ConfigError::Invalid(_))
        ));
        assert!(EngineConfig::from_toml_str("[weights]\nkeyword = -1.0\n").is_err());
        assert!(
            EngineConfig::from_toml_str("[[custom_metadata_fields]]\nname='a'\ntype='enum'\n")
                .is_err()
        );
        assert!(matches!(
            EngineConfig::from_toml_str("bogus = 1"),
            Err(ConfigError::Parse(_))
        ));
        assert!(EngineConfig::from_toml_str("[profiler]\npermutations = 64\n").is_err());
        assert!(EngineConfig::from_toml_str(
            "[profiler]\npermutations = 64\n[lsh]\nbands = 16\nrows = 4\n"
        )
        .is_ok());
    }

    #[test]
    fn custom_metadata() {
        let c = EngineConfig::from_toml_str(SAMPLE).unwrap();
        let ok = BTreeMap::from([
            ("license".to_string(), json!("cc0")),
            ("rows_hint".to_string(), json!(12)),
        ]);
        let v = c.validate_custom_metadata(&ok).unwrap();
        assert_eq!(v["rows_hint"], "12");
        let missing = BTreeMap::from([("rows_hint".to_string(), json!("x"))]);
        let errs = c.validate_custom_metadata(&missing).unwrap_err();
        let fields: Vec<_> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, ["license", "rows_hint"]);
        let bad_enum = BTreeMap::from([
            ("license".to_string(), json!("gpl")),
            ("extra".to_string(), json!(1)),
        ]);
        assert_eq!(c.validate_custom_metadata(&bad_enum).unwrap_err().len(), 2);
    }
}
