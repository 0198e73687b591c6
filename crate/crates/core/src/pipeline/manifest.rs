use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::standardizer::DatasetTag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceStatus {
    Completed,
    Skipped,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub status: InstanceStatus,
    /// ledger codes recorded for this instance
    #[serde(default)]
    pub tags: Vec<String>,
    /// produced files, relative to the output directory
    #[serde(default)]
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// wall-clock milliseconds per stage
    #[serde(default)]
    pub timings_ms: BTreeMap<String, u64>,
}

/// One entry per discovered data id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RunManifest(pub BTreeMap<String, ManifestEntry>);

impl RunManifest {
    pub fn count(&self, status: InstanceStatus) -> usize {
        self.0.values().filter(|e| e.status == status).count()
    }

    /// Copy with every timing removed, for comparing runs.
    pub fn without_timings(&self) -> RunManifest {
        let mut m = self.clone();
        for e in m.0.values_mut() {
            e.timings_ms.clear();
        }
        m
    }

    /// Process exit code: 0 when every instance completed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.0.values().all(|e| e.status == InstanceStatus::Completed) {
            0
        } else {
            2
        }
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn export_manifest(m: &RunManifest, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, m.to_json_pretty()? + "\n")?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn export_dataset_tags(tag: &DatasetTag, path: impl AsRef<Path>) -> Result<()> {
    tag.export(path)
}
