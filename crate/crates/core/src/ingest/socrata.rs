use std::thread;
use std::time::Duration;

use serde::Deserialize;

use super::plugin::{DiscoveryPlugin, FetchedDataset, IngestError, ListingEntry, ListingPage};

const MAX_BODY_BYTES: u64 = 512 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct SocrataConfig {
    pub base_url: String,
    pub page_size: usize,
    pub max_retries: u32,
    /// Upper bound on a single Retry-After wait.
    pub max_retry_wait: Duration,
    pub timeout: Duration,
    pub app_token: Option<String>,
}

impl SocrataConfig {
    pub fn new(base_url: &str) -> Self {
        SocrataConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            page_size: 100,
            max_retries: 2,
            max_retry_wait: Duration::from_secs(30),
            timeout: Duration::from_secs(60),
            app_token: None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct Catalog {
    results: Vec<CatalogResult>,
    #[serde(rename = "resultSetSize")]
    result_set_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct CatalogResult {
    resource: Resource,
}

#[derive(Debug, Deserialize)]
struct Resource {
    id: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: Option<String>,
}

/// Client for a Socrata-style portal: `GET /api/catalog/v1` for listings and
/// `GET /api/views/{id}/rows.csv` for exports. 5xx and 429 responses are
/// retried after the server's Retry-After (or one second).
pub struct SocrataPlugin {
    name: String,
    config: SocrataConfig,
    agent: ureq::Agent,
}

struct Response {
    body: Vec<u8>,
    content_type: Option<String>,
}

impl SocrataPlugin {
    pub fn new(name: &str, config: SocrataConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        SocrataPlugin {
            name: name.to_string(),
            config,
            agent,
        }
    }

    pub fn export_url(&self, id: &str) -> String {
        format!(
            "{}/api/views/{id}/rows.csv?accessType=DOWNLOAD",
            self.config.base_url
        )
    }

    fn unavailable(&self, reason: impl ToString, retry_after_secs: Option<u64>) -> IngestError {
        IngestError::PluginUnavailable {
            plugin: self.name.clone(),
            reason: reason.to_string(),
            retry_after_secs,
        }
    }

    fn get(&self, url: &str) -> Result<Response, IngestError> {
        let mut attempt = 0;
        loop {
            let mut req = self.agent.get(url);
            if let Some(token) = &self.config.app_token {
                req = req.header("X-App-Token", token);
            }
            let mut resp = req
                .call()
                .map_err(|e| self.unavailable(format!("{url}: {e}"), None))?;
            let status = resp.status().as_u16();
            if status == 404 || status == 410 {
                return Err(IngestError::SourceGone(url.to_string()));
            }
            if status == 429 || (500..600).contains(&status) {
                let retry_after = resp
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok());
                if attempt >= self.config.max_retries {
                    return Err(self.unavailable(format!("{url}: HTTP {status}"), retry_after));
                }
                attempt += 1;
                let wait =
                    Duration::from_secs(retry_after.unwrap_or(1)).min(self.config.max_retry_wait);
                log::warn!(
                    "{}: HTTP {status} from {url}, retrying in {wait:?}",
                    self.name
                );
                thread::sleep(wait);
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(self.unavailable(format!("{url}: HTTP {status}"), None));
            }
            let content_type = resp
                .headers()
                .get("content-type")
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let body = resp
                .body_mut()
                .with_config()
                .limit(MAX_BODY_BYTES)
                .read_to_vec()
                .map_err(|e| self.unavailable(format!("{url}: {e}"), None))?;
            return Ok(Response { body, content_type });
        }
    }
}

impl DiscoveryPlugin for SocrataPlugin {
    fn name(&self) -> &str {
        &self.name
    }

    fn list_page(&self, offset: usize, limit: usize) -> Result<ListingPage, IngestError> {
        let limit = limit.min(self.config.page_size.max(1));
        let url = format!(
            "{}/api/catalog/v1?limit={limit}&offset={offset}",
            self.config.base_url
        );
        let resp = self.get(&url)?;
        let catalog: Catalog =
            serde_json::from_slice(&resp.body).map_err(|e| IngestError::MalformedListing {
                plugin: self.name.clone(),
                reason: e.to_string(),
            })?;
        Ok(ListingPage {
            entries: catalog
                .results
                .into_iter()
                .map(|r| ListingEntry {
                    locator: self.export_url(&r.resource.id),
                    title: r.resource.name,
                    description: r.resource.description.unwrap_or_default(),
                    format: Some("csv".into()),
                })
                .collect(),
            total: catalog.result_set_size,
        })
    }

    /// `locator` is an export URL or a bare resource id.
    fn fetch(&self, locator: &str) -> Result<FetchedDataset, IngestError> {
        let url = if locator.contains("://") {
            locator.to_string()
        } else {
            self.export_url(locator)
        };
        let resp = self.get(&url)?;
        Ok(FetchedDataset {
            bytes: resp.body,
            content_type: resp.content_type,
            name: None,
            description: None,
        })
    }
}
