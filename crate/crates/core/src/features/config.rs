use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::hu_range::HuRangeDict;
use crate::error::{Error, Result};

/// Second-level keys accepted under every task.
pub const SUPPORTED_KEYS: [&str; 9] = [
    "selectedObjs",
    "refObj",
    "refObjUB",
    "refObjLB",
    "coarse",
    "excludeProsthesisSamples",
    "enforceMuscleRange",
    "enforceFatRange",
    "dict_hu_range",
];

/// Task used for reference objects unless another task names them.
pub const DEFAULT_REFERENCE_TASK: &str = "total";

/// Per-task analysis settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEvaConfig {
    #[serde(rename = "selectedObjs", default, skip_serializing_if = "Vec::is_empty")]
    pub selected_objs: Vec<String>,
    #[serde(rename = "refObj", default, skip_serializing_if = "Option::is_none")]
    pub ref_obj: Option<String>,
    #[serde(rename = "refObjUB", default, skip_serializing_if = "Option::is_none")]
    pub ref_obj_ub: Option<String>,
    #[serde(rename = "refObjLB", default, skip_serializing_if = "Option::is_none")]
    pub ref_obj_lb: Option<String>,
    #[serde(default)]
    pub coarse: bool,
    #[serde(rename = "excludeProsthesisSamples", default)]
    pub exclude_prosthesis_samples: bool,
    #[serde(rename = "enforceMuscleRange", default)]
    pub enforce_muscle_range: bool,
    #[serde(rename = "enforceFatRange", default)]
    pub enforce_fat_range: bool,
    #[serde(rename = "dict_hu_range", default, skip_serializing_if = "Option::is_none")]
    pub dict_hu_range: Option<BTreeMap<String, [f64; 2]>>,
}

/// How a task's reference objects are used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reference {
    /// volume between the top of `upper` and the bottom of `lower`
    Bounds { upper: String, lower: String },
    /// central plane of one object (2D analysis)
    CentralPlane(String),
}

impl TaskEvaConfig {
    pub fn reference(&self) -> Option<Reference> {
        match (&self.ref_obj, &self.ref_obj_ub, &self.ref_obj_lb) {
            (Some(r), None, None) => Some(Reference::CentralPlane(r.clone())),
            (None, Some(u), Some(l)) => Some(Reference::Bounds {
                upper: u.clone(),
                lower: l.clone(),
            }),
            _ => None,
        }
    }

    pub fn hu_ranges(&self) -> Result<HuRangeDict> {
        match &self.dict_hu_range {
            Some(o) => HuRangeDict::with_overrides(o),
            None => Ok(HuRangeDict::default()),
        }
    }

    fn validate(&self, task: &str) -> Result<()> {
        let path = |k: &str| format!("target_eva_config.{task}.{k}");
        if self.ref_obj.is_some() && (self.ref_obj_ub.is_some() || self.ref_obj_lb.is_some()) {
            return Err(Error::config(path("refObj"), "refObj cannot be combined with refObjUB/refObjLB"));
        }
        if self.ref_obj_ub.is_some() != self.ref_obj_lb.is_some() {
            let missing = if self.ref_obj_ub.is_some() { "refObjLB" } else { "refObjUB" };
            return Err(Error::config(path(missing), "refObjUB and refObjLB must be given together"));
        }
        if let Some(o) = &self.dict_hu_range {
            HuRangeDict::with_overrides(o).map_err(|e| match e {
                Error::Config { path: p, message } => Error::config(format!("target_eva_config.{task}.{p}"), message),
                other => other,
            })?;
        }
        Ok(())
    }
}

/// Task name -> analysis settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetEvaConfig(pub BTreeMap<String, TaskEvaConfig>);

impl TargetEvaConfig {
    /// Parse and validate, naming the offending key path on error.
    pub fn from_value(v: &Value) -> Result<Self> {
        let top = v
            .as_object()
            .ok_or_else(|| Error::config("target_eva_config", "expected an object keyed by task name"))?;
        let mut out = BTreeMap::new();
        for (task, cfg) in top {
            let obj = cfg
                .as_object()
                .ok_or_else(|| Error::config(format!("target_eva_config.{task}"), "expected an object"))?;
            for k in obj.keys() {
                if !SUPPORTED_KEYS.contains(&k.as_str()) {
                    return Err(Error::config(
                        format!("target_eva_config.{task}.{k}"),
                        format!("unsupported key '{k}'"),
                    ));
                }
            }
            let parsed: TaskEvaConfig = serde_json::from_value(cfg.clone())
                .map_err(|e| Error::config(format!("target_eva_config.{task}"), e.to_string()))?;
            parsed.validate(task)?;
            out.insert(task.clone(), parsed);
        }
        let cfg = TargetEvaConfig(out);
        let refs: Vec<&String> = cfg
            .0
            .iter()
            .filter(|(_, c)| c.reference().is_some())
            .map(|(t, _)| t)
            .collect();
        if refs.len() > 1 {
            return Err(Error::config(
                "target_eva_config",
                format!("reference objects defined in more than one task: {refs:?}"),
            ));
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(&serde_json::from_str(text)?)
    }

    /// Task defining the reference objects and how they are used.
    pub fn reference(&self) -> Option<(&str, Reference)> {
        self.0
            .iter()
            .find_map(|(t, c)| c.reference().map(|r| (t.as_str(), r)))
    }

    pub fn exclude_prosthesis_samples(&self) -> bool {
        self.0.values().any(|c| c.exclude_prosthesis_samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn demo_config_accepted() {
        let v = json!({
            "total": {"refObjUB": "vertebrae_L1", "refObjLB": "pelvic", "excludeProsthesisSamples": true},
            "tissue_types": {"selectedObjs": ["subcutaneous_fat", "torso_fat", "skeletal_muscle"], "enforceMuscleRange": false}
        });
        let c = TargetEvaConfig::from_value(&v).unwrap();
        assert_eq!(
            c.reference(),
            Some((
                "total",
                Reference::Bounds {
                    upper: "vertebrae_L1".into(),
                    lower: "pelvic".into()
                }
            ))
        );
        assert!(c.exclude_prosthesis_samples());
        assert_eq!(c.0["tissue_types"].selected_objs.len(), 3);
    }

    #[test]
    fn unknown_key_named() {
        let v = json!({"total": {"refObjXX": "a"}});
        match TargetEvaConfig::from_value(&v) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "target_eva_config.total.refObjXX"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exclusive_reference_keys() {
        let v = json!({"total": {"refObj": "vertebrae_L3", "refObjUB": "vertebrae_L1", "refObjLB": "hip"}});
        assert!(TargetEvaConfig::from_value(&v).is_err());
        let v = json!({"total": {"refObjUB": "vertebrae_L1"}});
        assert!(TargetEvaConfig::from_value(&v).is_err());
        let v = json!({"total": {"refObj": "vertebrae_L3"}});
        assert_eq!(
            TargetEvaConfig::from_value(&v).unwrap().reference().unwrap().1,
            Reference::CentralPlane("vertebrae_L3".into())
        );
    }

    #[test]
    fn wrong_value_type() {
        let v = json!({"total": {"coarse": "yes"}});
        assert!(matches!(TargetEvaConfig::from_value(&v), Err(Error::Config { .. })));
    }

    #[test]
    fn hu_range_override_validated() {
        let v = json!({"tissue_types": {"dict_hu_range": {"fat": [-190, -30]}, "enforceFatRange": true}});
        let c = TargetEvaConfig::from_value(&v).unwrap();
        assert_eq!(c.0["tissue_types"].hu_ranges().unwrap().fat, [-190.0, -30.0]);
        let v = json!({"tissue_types": {"dict_hu_range": {"fat": [30, -30]}}});
        assert!(TargetEvaConfig::from_value(&v).is_err());
    }
}
