use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dsearch_core::augment::{augment, AugmentationSpec};
use dsearch_core::ingest::{content_hash, materialize, materialize_bytes, ProvenanceRecord};
use dsearch_core::profiler::profile::dataset_id;
use dsearch_core::profiler::{
    profile_table, profile_table_with_overrides, ColumnType, DatasetMeta, TableData,
};
use dsearch_core::search::{
    execute_query, Augmentation, Query, RelatedMode, RelatedQuery, SearchError,
};

use crate::error::ApiError;
use crate::multipart::{self, Part};
use crate::state::AppState;

pub type Shared = Arc<AppState>;

/// Plugin name recorded in the provenance of uploaded files.
pub const UPLOAD_PLUGIN: &str = "upload";

fn form_parts(headers: &HeaderMap, body: &[u8]) -> Result<Option<Vec<Part>>, ApiError> {
    let Some(ct) = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
    else {
        return Ok(None);
    };
    if !ct
        .trim_start()
        .to_ascii_lowercase()
        .starts_with("multipart/")
    {
        return Ok(None);
    }
    let boundary = multipart::boundary(ct)
        .ok_or_else(|| ApiError::bad_request("InvalidMultipart", "missing boundary"))?;
    multipart::parse(body, &boundary)
        .map(Some)
        .map_err(|e| ApiError::bad_request("InvalidMultipart", e.to_string()))
}

fn take_part(parts: &mut Vec<Part>, name: &str) -> Option<Part> {
    let i = parts.iter().position(|p| p.name == name)?;
    Some(parts.remove(i))
}

fn part_text(p: &Part) -> Result<&str, ApiError> {
    std::str::from_utf8(&p.data).map_err(|_| {
        ApiError::bad_request(
            "InvalidMultipart",
            format!("part '{}' is not UTF-8", p.name),
        )
    })
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn file_stem(name: &str) -> String {
    std::path::Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

pub async fn search(
    State(state): State<Shared>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let query = match form_parts(&headers, &body)? {
        Some(mut parts) => {
            let mut q = match take_part(&mut parts, "query") {
                Some(p) if !p.data.iter().all(u8::is_ascii_whitespace) => {
                    serde_json::from_str::<Query>(part_text(&p)?)
                        .map_err(|e| ApiError::from(SearchError::InvalidQuery(e.to_string())))?
                }
                _ => Query::default(),
            };
            if let Some(file) = take_part(&mut parts, "related_file") {
                let mode = match take_part(&mut parts, "mode") {
                    Some(p) => part_text(&p)?
                        .trim()
                        .trim_matches('"')
                        .parse::<RelatedMode>()
                        .map_err(|e| ApiError::from(SearchError::InvalidQuery(e)))?,
                    None => q.related.as_ref().map(|r| r.mode).unwrap_or_default(),
                };
                let config = state.config.profiler.clone();
                let profile = blocking(move || {
                    let table = TableData::from_csv_bytes(&file.data)?;
                    let name = file
                        .filename
                        .as_deref()
                        .map(file_stem)
                        .unwrap_or_else(|| "related_file".into());
                    Ok(profile_table(
                        &table,
                        &config,
                        DatasetMeta::named(&name, UPLOAD_PLUGIN),
                    )?)
                })
                .await?;
                q.related = Some(RelatedQuery { profile, mode });
            }
            q
        }
        None => {
            if body.iter().all(u8::is_ascii_whitespace) {
                return Err(SearchError::EmptyQuery.into());
            }
            serde_json::from_slice::<Query>(&body)
                .map_err(|e| ApiError::from(SearchError::InvalidQuery(e.to_string())))?
        }
    };
    let snapshot = state.snapshot();
    let page = execute_query(&query, &snapshot, &state.config.weights, state.gazetteer)?;
    Ok(Json(serde_json::to_value(page).expect("page serializes")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UploadMetadata {
    pub name: Option<String>,
    pub description: String,
    pub source: Option<String>,
    pub type_overrides: BTreeMap<String, ColumnType>,
    pub custom_metadata: BTreeMap<String, Value>,
}

pub async fn upload(
    State(state): State<Shared>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let mut parts = form_parts(&headers, &body)?.ok_or_else(|| {
        ApiError::bad_request("InvalidMultipart", "upload expects multipart/form-data")
    })?;
    let file = take_part(&mut parts, "file")
        .ok_or_else(|| ApiError::bad_request("MissingFile", "no 'file' part"))?;
    let meta: UploadMetadata = match take_part(&mut parts, "metadata") {
        Some(p) => serde_json::from_str(part_text(&p)?).map_err(|e| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "InvalidMetadata",
                e.to_string(),
            )
        })?,
        None => UploadMetadata::default(),
    };
    let custom = state
        .config
        .validate_custom_metadata(&meta.custom_metadata)
        .map_err(|violations| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "InvalidMetadata",
                "custom metadata does not match the configured schema",
            )
            .with_details(json!({ "violations": violations }))
        })?;
    let duplicate = |id: &str| {
        ApiError::new(
            StatusCode::CONFLICT,
            "Duplicate",
            "a dataset with the same content is already indexed",
        )
        .with_details(json!({ "id": id }))
    };
    let id = dataset_id(&content_hash(&file.data));
    if state.snapshot().contains(&id) {
        return Err(duplicate(&id));
    }
    let st = state.clone();
    let profile = blocking(move || {
        let table = TableData::from_csv_bytes(&file.data)?;
        let locator = file.filename.clone().unwrap_or_else(|| format!("{id}.csv"));
        let name = meta
            .name
            .filter(|n| !n.trim().is_empty())
            .unwrap_or_else(|| file_stem(&locator));
        let provenance = ProvenanceRecord::for_bytes(UPLOAD_PLUGIN, &locator, &file.data);
        let dataset_meta = DatasetMeta {
            name,
            description: meta.description,
            source: meta.source.unwrap_or_else(|| UPLOAD_PLUGIN.to_string()),
            provenance: Some(provenance),
            custom_metadata: custom,
        };
        let profile = profile_table_with_overrides(
            &table,
            &st.config.profiler,
            dataset_meta,
            &meta.type_overrides,
        )?;
        st.cache.put(&file.data)?;
        match st.insert(profile.clone())? {
            Ok(()) => Ok(profile),
            Err(existing) => Err(duplicate(&existing)),
        }
    })
    .await?;
    log::info!("uploaded {} ({} rows)", profile.id, profile.row_count);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "id": profile.id, "profile": profile })),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentRequest {
    #[serde(default)]
    pub left_id: Option<String>,
    pub right_id: String,
    #[serde(default)]
    pub spec: Option<AugmentationSpec>,
    /// A search result's `augmentation` field, used when `spec` is absent.
    #[serde(default)]
    pub augmentation: Option<Augmentation>,
}

/// Renders JSON as header-safe ASCII.
fn ascii_json(v: &impl Serialize) -> String {
    let text = serde_json::to_string(v).expect("serializable");
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_ascii() && !c.is_ascii_control() {
            out.push(c);
        } else {
            let mut buf = [0u16; 2];
            for unit in c.encode_utf16(&mut buf) {
                out.push_str(&format!("\\u{unit:04x}"));
            }
        }
    }
    out
}

pub const PROVENANCE_HEADER: &str = "x-provenance";

pub async fn augment_handler(
    State(state): State<Shared>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let (req, left_file) = match form_parts(&headers, &body)? {
        Some(mut parts) => {
            let req_part = take_part(&mut parts, "request")
                .ok_or_else(|| ApiError::bad_request("InvalidRequest", "no 'request' part"))?;
            let req: AugmentRequest = serde_json::from_str(part_text(&req_part)?)
                .map_err(|e| ApiError::bad_request("InvalidRequest", e.to_string()))?;
            (req, take_part(&mut parts, "left_file"))
        }
        None => (
            serde_json::from_slice::<AugmentRequest>(&body)
                .map_err(|e| ApiError::bad_request("InvalidRequest", e.to_string()))?,
            None,
        ),
    };
    let spec = match (&req.spec, &req.augmentation) {
        (Some(s), _) => s.clone(),
        (None, Some(a)) => AugmentationSpec::from_augmentation(a),
        (None, None) => {
            return Err(ApiError::bad_request(
                "InvalidRequest",
                "either 'spec' or 'augmentation' is required",
            ))
        }
    };
    let snapshot = state.snapshot();
    let right = snapshot
        .get(&req.right_id)
        .ok_or_else(|| ApiError::not_found(&req.right_id))?
        .provenance
        .clone();
    let left = match (&left_file, &req.left_id) {
        (Some(_), _) => None,
        (None, Some(id)) => Some(
            snapshot
                .get(id)
                .ok_or_else(|| ApiError::not_found(id))?
                .provenance
                .clone(),
        ),
        (None, None) => {
            return Err(ApiError::bad_request(
                "InvalidRequest",
                "either 'left_id' or a 'left_file' part is required",
            ))
        }
    };
    drop(snapshot);
    let st = state.clone();
    let result = blocking(move || {
        let (left_table, left_id) = match (left_file, left) {
            (Some(file), _) => {
                let id = req
                    .left_id
                    .clone()
                    .unwrap_or_else(|| dataset_id(&content_hash(&file.data)));
                (TableData::from_csv_bytes(&file.data)?, id)
            }
            (None, Some(prov)) => (
                materialize(&prov, &st.cache, &st.plugins)?,
                req.left_id.clone().unwrap_or_default(),
            ),
            (None, None) => unreachable!("checked above"),
        };
        let right_table = materialize(&right, &st.cache, &st.plugins)?;
        let mut out = augment(&left_table, &right_table, &spec)?;
        out.provenance.left_id = left_id;
        out.provenance.right_id = req.right_id.clone();
        Ok(out)
    })
    .await?;
    let provenance = HeaderValue::from_str(&ascii_json(&result.provenance))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let mut resp = (
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static("text/csv; charset=utf-8"),
            ),
            (
                header::CONTENT_DISPOSITION,
                HeaderValue::from_static("attachment; filename=\"augmented.csv\""),
            ),
        ],
        result.table.to_csv_bytes(),
    )
        .into_response();
    resp.headers_mut().insert(PROVENANCE_HEADER, provenance);
    Ok(resp)
}

#[derive(Debug, Serialize)]
struct DatasetEntry<'a> {
    id: &'a str,
    name: &'a str,
    source: &'a str,
    row_count: usize,
    column_count: usize,
}

pub async fn list_datasets(State(state): State<Shared>) -> Json<Value> {
    let snapshot = state.snapshot();
    let entries: Vec<DatasetEntry> = snapshot
        .profiles()
        .map(|p| DatasetEntry {
            id: &p.id,
            name: &p.name,
            source: &p.source,
            row_count: p.row_count,
            column_count: p.columns.len(),
        })
        .collect();
    Json(json!(entries))
}

pub async fn get_dataset(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let snapshot = state.snapshot();
    let profile = snapshot.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    Ok(Json(
        serde_json::to_value(profile).expect("profile serializes"),
    ))
}

pub async fn download(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let provenance = state
        .snapshot()
        .get(&id)
        .ok_or_else(|| ApiError::not_found(&id))?
        .provenance
        .clone();
    let st = state.clone();
    let hash = provenance.content_hash.clone();
    let bytes =
        blocking(move || Ok(materialize_bytes(&provenance, &st.cache, &st.plugins)?)).await?;
    let disposition =
        HeaderValue::from_str(&format!("attachment; filename=\"{id}.csv\"")).expect("id is ASCII");
    Ok((
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static("text/csv; charset=utf-8"),
            ),
            (header::CONTENT_DISPOSITION, disposition),
            (
                header::ETAG,
                HeaderValue::from_str(&format!("\"{hash}\"")).expect("hex hash"),
            ),
        ],
        bytes,
    )
        .into_response())
}

pub async fn stats(State(state): State<Shared>) -> Json<Value> {
    let snapshot = state.snapshot();
    let mut per_source: BTreeMap<&str, usize> = BTreeMap::new();
    let mut per_type: BTreeMap<&'static str, usize> = BTreeMap::new();
    for p in snapshot.profiles() {
        *per_source.entry(&p.source).or_default() += 1;
        for c in &p.columns {
            *per_type.entry(c.effective_type().as_str()).or_default() += 1;
        }
    }
    Json(json!({
        "dataset_count": snapshot.len(),
        "per_source": per_source,
        "per_type": per_type,
    }))
}

/// The parts of the configuration clients need: the upload schema, ranking
/// weights and configured sources.
pub async fn config(State(state): State<Shared>) -> Json<Value> {
    let c = &state.config;
    Json(json!({
        "custom_metadata_fields": c.custom_metadata_fields,
        "weights": c.weights,
        "sources": state.plugins.names().collect::<Vec<_>>(),
        "profiler": c.profiler,
        "lsh": c.lsh,
    }))
}

pub async fn areas(State(state): State<Shared>) -> Json<Value> {
    Json(json!(state.gazetteer.areas()))
}

pub async fn area(
    State(state): State<Shared>,
    Path(name): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let a = state.gazetteer.lookup(&name).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "UnknownNamedArea",
            format!("unknown named area '{name}'"),
        )
    })?;
    Ok(Json(json!(a)))
}

pub async fn health(State(state): State<Shared>) -> Json<Value> {
    Json(json!({ "status": "ok", "generation": state.snapshot().generation() }))
}
