use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CrpRecord, PipelineSettings};
use crate::error::{Error, Result};

pub const CRP_DB_VERSION: u32 = 1;

/// Enrolled challenge-response pairs keyed by `(device_id, challenge_id)`.
///
/// Persisted as JSON with fields `version`, `created_at`, `pipeline`, and
/// `records` (sorted by key). Reads are shared; inserts need `&mut self`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpDatabase {
    pub version: u32,
    /// Caller-supplied timestamp (seconds since the Unix epoch).
    pub created_at: u64,
    pub pipeline: PipelineSettings,
    records: BTreeMap<(u32, u32), CrpRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbDocument {
    version: u32,
    created_at: u64,
    pipeline: PipelineSettings,
    records: Vec<CrpRecord>,
}

impl CrpDatabase {
    pub fn new(pipeline: PipelineSettings, created_at: u64) -> Self {
        Self {
            version: CRP_DB_VERSION,
            created_at,
            pipeline,
            records: BTreeMap::new(),
        }
    }

    /// Inserts a record, rejecting a duplicate `(device_id, challenge_id)` key.
    pub fn insert(&mut self, record: CrpRecord) -> Result<()> {
        let key = (record.device_id, record.challenge.challenge_id);
        if self.records.contains_key(&key) {
            return Err(Error::param(
                "records",
                format!("duplicate key device {} challenge {}", key.0, key.1),
            ));
        }
        self.records.insert(key, record);
        Ok(())
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CrpRecord>) -> Result<()> {
        records.into_iter().try_for_each(|r| self.insert(r))
    }

    pub fn get(&self, device_id: u32, challenge_id: u32) -> Option<&CrpRecord> {
        self.records.get(&(device_id, challenge_id))
    }

    pub fn records(&self) -> impl Iterator<Item = &CrpRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_json(&self) -> String {
        let doc = DbDocument {
            version: self.version,
            created_at: self.created_at,
            pipeline: self.pipeline.clone(),
            records: self.records.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&doc).expect("database serializes") + "\n"
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let doc: DbDocument = serde_json::from_str(text)?;
        if doc.version != CRP_DB_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported database version {}",
                doc.version
            )));
        }
        let mut db = Self::new(doc.pipeline, doc.created_at);
        for r in doc.records {
            db.insert(r).map_err(serde::de::Error::custom)?;
        }
        Ok(db)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::json(path, e))
    }
}
