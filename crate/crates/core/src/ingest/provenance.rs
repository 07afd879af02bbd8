use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Where a dataset's bytes came from and how to get them again.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub source_plugin: String,
    /// Plugin-specific: a file path, a resource id, or a URL.
    pub locator: String,
    pub retrieved_at: DateTime<Utc>,
    /// Lowercase hex SHA-256 of the raw bytes.
    pub content_hash: String,
    pub bytes_size: u64,
}

impl ProvenanceRecord {
    pub fn for_bytes(source_plugin: &str, locator: &str, bytes: &[u8]) -> Self {
        ProvenanceRecord {
            source_plugin: source_plugin.to_string(),
            locator: locator.to_string(),
            retrieved_at: Utc::now(),
            content_hash: content_hash(bytes),
            bytes_size: bytes.len() as u64,
        }
    }

    pub fn matches(&self, bytes: &[u8]) -> bool {
        content_hash(bytes) == self.content_hash
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
