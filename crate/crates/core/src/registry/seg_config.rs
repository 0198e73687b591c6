use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Coarse,
    Fine,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resolution::Coarse => "coarse",
            Resolution::Fine => "fine",
        })
    }
}

impl FromStr for Resolution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(Resolution::Coarse),
            "fine" => Ok(Resolution::Fine),
            other => Err(Error::InvalidParameter(format!("unknown resolution '{other}'"))),
        }
    }
}

/// Version-resolved model settings for one task.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegConfig {
    pub task_name: String,
    pub version: u8,
    pub resolution: Resolution,
    pub task_ids: Vec<u32>,
    pub trainer: String,
    pub voxel_size: f64,
    pub crop: Option<String>,
}

type SettingsTable = BTreeMap<String, BTreeMap<String, BTreeMap<String, Value>>>;

fn settings() -> &'static SettingsTable {
    static TABLE: OnceLock<SettingsTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/segmentation_settings.json"))
            .expect("bundled segmentation settings are valid JSON")
    })
}

/// Look up `key_v<version>` first, then the unversioned `key`.
fn versioned<'a>(entry: &'a BTreeMap<String, Value>, key: &str, version: u8) -> Option<&'a Value> {
    entry
        .get(&format!("{key}_v{version}"))
        .or_else(|| entry.get(key))
}

fn default_trainer(version: u8) -> &'static str {
    if version == 1 {
        "nnUNetTrainerV2"
    } else {
        "nnUNetTrainer"
    }
}

pub fn get_seg_config_by_task_name(task: &str, resolution: Resolution, version: u8) -> Result<SegConfig> {
    if !(1..=2).contains(&version) {
        return Err(Error::InvalidParameter(format!(
            "segmentation model version {version} (expected 1 or 2)"
        )));
    }
    let per_task = settings()
        .get(task)
        .ok_or_else(|| Error::UnknownTask(task.to_string()))?;
    let entry = per_task
        .get(&resolution.to_string())
        .ok_or_else(|| Error::UnsupportedResolution {
            task: task.to_string(),
            resolution: resolution.to_string(),
        })?;
    let bad = |what: &str| Error::InvalidParameter(format!("settings for {task}/{resolution}: {what}"));

    let task_ids = match versioned(entry, "task_id", version) {
        Some(Value::Number(n)) => vec![n.as_u64().ok_or_else(|| bad("task id"))? as u32],
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| v.as_u64().map(|n| n as u32).ok_or_else(|| bad("task id")))
            .collect::<Result<_>>()?,
        _ => {
            return Err(Error::UnsupportedResolution {
                task: task.to_string(),
                resolution: format!("{resolution} (version {version})"),
            })
        }
    };
    let trainer = match versioned(entry, "trainer", version).and_then(Value::as_str) {
        Some("default") | None => default_trainer(version).to_string(),
        Some(t) => t.to_string(),
    };
    let task_name = versioned(entry, "task_name", version)
        .and_then(Value::as_str)
        .unwrap_or(task)
        .to_string();
    let voxel_size = entry
        .get("voxel_size")
        .and_then(Value::as_f64)
        .ok_or_else(|| bad("voxel_size"))?;
    if voxel_size != 1.5 && voxel_size != 3.0 {
        return Err(bad("only 1.5 and 3.0 mm models are supported"));
    }
    let crop = versioned(entry, "crop", version)
        .and_then(Value::as_str)
        .map(str::to_string);
    Ok(SegConfig {
        task_name,
        version,
        resolution,
        task_ids,
        trainer,
        voxel_size,
        crop,
    })
}
