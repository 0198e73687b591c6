use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SEVERITY_ERROR: &str = "Error";
pub const SEVERITY_WARNING: &str = "Warning";

pub const UPPER_BOUND_CROPPED: &str = "upperBoundCropped";
pub const UPPER_BOUND_MISSING: &str = "upperBoundMissing";
pub const LOWER_BOUND_CROPPED: &str = "lowerBoundCropped";
pub const LOWER_BOUND_MISSING: &str = "lowerBoundMissing";
pub const REF_OBJECT_CROPPED: &str = "refObjCropped";
pub const REF_OBJECT_MISSING: &str = "refObjMissing";
pub const PROSTHESIS_DETECTED: &str = "prosthesisDetected";
pub const BODY_TRUNK_CROPPED: &str = "bodyTrunkCropped";
pub const ARMS_DETECTED: &str = "armsDetected";
pub const PROCESSING_FAILED: &str = "processingFailed";

/// Exclusion/warning ledger: code -> severity -> data ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetTag(pub BTreeMap<String, BTreeMap<String, Vec<String>>>);

impl DatasetTag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `data_id` under `code`; a second call for the same code and id
    /// (whatever the severity) changes nothing.
    pub fn add_tag_to_data(&mut self, code: &str, data_id: &str, severity: &str) {
        let by_sev = self.0.entry(code.to_string()).or_default();
        if by_sev.values().any(|ids| ids.iter().any(|i| i == data_id)) {
            return;
        }
        by_sev.entry(severity.to_string()).or_default().push(data_id.to_string());
    }

    pub fn contains(&self, code: &str, data_id: &str) -> bool {
        self.0
            .get(code)
            .is_some_and(|s| s.values().any(|ids| ids.iter().any(|i| i == data_id)))
    }

    /// Codes recorded for one data id, sorted.
    pub fn codes_for(&self, data_id: &str) -> Vec<String> {
        self.0
            .keys()
            .filter(|code| self.contains(code, data_id))
            .cloned()
            .collect()
    }

    /// Fold another ledger in, keeping this one's ids first.
    pub fn merge(&mut self, other: &DatasetTag) {
        for (code, by_sev) in &other.0 {
            for (sev, ids) in by_sev {
                for id in ids {
                    self.add_tag_to_data(code, id, sev);
                }
            }
        }
    }

    /// Sort id lists so output does not depend on processing order.
    pub fn sorted(mut self) -> Self {
        for by_sev in self.0.values_mut() {
            for ids in by_sev.values_mut() {
                ids.sort();
            }
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_pretty()? + "\n")?;
        Ok(())
    }
}

/// Free-function form of [`DatasetTag::add_tag_to_data`].
pub fn add_tag_to_data(tag: &mut DatasetTag, code: &str, data_id: &str, severity: &str) {
    tag.add_tag_to_data(code, data_id, severity);
}
