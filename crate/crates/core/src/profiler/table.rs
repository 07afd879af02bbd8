use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One named column of raw cell strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<String>,
}

/// Column-oriented raw table. The first CSV row is always the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableData {
    columns: Vec<Column>,
    row_count: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("table has no columns or no rows")]
    EmptyTable,
    #[error("ragged rows: column '{column}' has {found} values, expected {expected}")]
    RaggedRows {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl TableError {
    pub fn code(&self) -> &'static str {
        match self {
            TableError::EmptyTable => "EmptyTable",
            TableError::RaggedRows { .. } => "RaggedRows",
            TableError::Csv(_) => "MalformedCsv",
        }
    }
}

impl TableData {
    /// Builds a table from columns, de-duplicating names (case-insensitively)
    /// with `_2`, `_3`, ... suffixes. Columns must all have the same length.
    pub fn new(columns: Vec<Column>) -> Result<Self, TableError> {
        let row_count = columns.first().map(|c| c.values.len()).unwrap_or(0);
        for c in &columns {
            if c.values.len() != row_count {
                return Err(TableError::RaggedRows {
                    column: c.name.clone(),
                    expected: row_count,
                    found: c.values.len(),
                });
            }
        }
        let mut table = TableData { columns, row_count };
        table.dedup_names();
        Ok(table)
    }

    /// Same as [`TableData::new`] but also rejects tables without rows or columns.
    pub fn new_nonempty(columns: Vec<Column>) -> Result<Self, TableError> {
        let t = Self::new(columns)?;
        if t.columns.is_empty() || t.row_count == 0 {
            return Err(TableError::EmptyTable);
        }
        Ok(t)
    }

    pub fn from_pairs<S: Into<String>>(pairs: Vec<(S, Vec<S>)>) -> Result<Self, TableError> {
        Self::new(
            pairs
                .into_iter()
                .map(|(n, v)| Column {
                    name: n.into(),
                    values: v.into_iter().map(Into::into).collect(),
                })
                .collect(),
        )
    }

    /// Parses UTF-8 CSV (invalid bytes are replaced). Rows with a different
    /// field count than the header are rejected, not repaired.
    pub fn from_csv_bytes(bytes: &[u8]) -> Result<Self, TableError> {
        let text = String::from_utf8_lossy(bytes);
        let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let mut columns: Vec<Column> = headers
            .iter()
            .map(|h| Column {
                name: h.trim().to_string(),
                values: Vec::new(),
            })
            .collect();
        if columns.is_empty() || (columns.len() == 1 && columns[0].name.is_empty()) {
            return Err(TableError::EmptyTable);
        }
        for (row_idx, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != columns.len() {
                let column = columns
                    .get(record.len().min(columns.len().saturating_sub(1)))
                    .map(|c| c.name.clone())
                    .unwrap_or_default();
                return Err(TableError::RaggedRows {
                    column: format!("{column} (row {})", row_idx + 1),
                    expected: columns.len(),
                    found: record.len(),
                });
            }
            for (col, field) in columns.iter_mut().zip(record.iter()) {
                col.values.push(field.to_string());
            }
        }
        Self::new_nonempty(columns)
    }

    /// RFC-4180 CSV with LF line endings.
    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("write to Vec");
        for row in 0..self.row_count {
            w.write_record(self.columns.iter().map(|c| c.values[row].as_str()))
                .expect("write to Vec");
        }
        w.into_inner().expect("flush Vec")
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Case-insensitive lookup, used where names come from user input.
    pub fn column_folded(&self, name: &str) -> Option<&Column> {
        self.column(name).or_else(|| {
            let folded = name.to_lowercase();
            self.columns
                .iter()
                .find(|c| c.name.to_lowercase() == folded)
        })
    }

    pub fn row(&self, i: usize) -> Vec<String> {
        self.columns.iter().map(|c| c.values[i].clone()).collect()
    }

    /// Hex SHA-256 over the canonical CSV encoding.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_bytes()))
    }

    fn dedup_names(&mut self) {
        let mut seen: HashSet<String> = HashSet::new();
        for c in &mut self.columns {
            let base = c.name.clone();
            let mut candidate = base.clone();
            let mut n = 2;
            while !seen.insert(candidate.to_lowercase()) {
                candidate = format!("{base}_{n}");
                n += 1;
            }
            c.name = candidate;
        }
    }
}
