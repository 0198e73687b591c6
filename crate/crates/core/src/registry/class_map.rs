use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label integer -> anatomy name table of one segmentation task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    #[serde(rename = "task")]
    pub task_name: String,
    pub version: u8,
    pub entries: BTreeMap<u16, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<BTreeMap<u16, String>>,
}

impl ClassMap {
    pub fn from_json(text: &str) -> Result<Self> {
        let map: ClassMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for (&label, name) in self.iter() {
            if label == 0 {
                return Err(Error::InvalidClassMap(format!(
                    "{}: label 0 is reserved for background",
                    self.task_name
                )));
            }
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidClassMap(format!(
                    "{}: duplicate anatomy name '{name}'",
                    self.task_name
                )));
            }
        }
        if let Some(aux) = &self.auxiliary {
            if let Some(l) = aux.keys().find(|l| self.entries.contains_key(l)) {
                return Err(Error::InvalidClassMap(format!(
                    "{}: label {l} defined in both main and auxiliary maps",
                    self.task_name
                )));
            }
        }
        Ok(())
    }

    /// Main entries followed by auxiliary ones (when kept).
    pub fn iter(&self) -> impl Iterator<Item = (&u16, &String)> {
        self.entries
            .iter()
            .chain(self.auxiliary.iter().flat_map(|a| a.iter()))
    }

    pub fn name_of(&self, label: u16) -> Option<&str> {
        self.iter().find(|(l, _)| **l == label).map(|(_, n)| n.as_str())
    }

    pub fn label_of(&self, name: &str) -> Option<u16> {
        self.iter().find(|(_, n)| *n == name).map(|(l, _)| *l)
    }

    pub fn names(&self) -> Vec<&str> {
        self.iter().map(|(_, n)| n.as_str()).collect()
    }

    pub fn without_auxiliary(mut self) -> Self {
        self.auxiliary = None;
        self
    }

    /// Relabel through a bijection old -> new; used to check label agnosticism.
    pub fn permuted(&self, perm: &BTreeMap<u16, u16>) -> ClassMap {
        let remap = |m: &BTreeMap<u16, String>| {
            m.iter()
                .map(|(l, n)| (*perm.get(l).unwrap_or(l), n.clone()))
                .collect::<BTreeMap<_, _>>()
        };
        ClassMap {
            task_name: self.task_name.clone(),
            version: self.version,
            entries: remap(&self.entries),
            auxiliary: self.auxiliary.as_ref().map(remap),
        }
    }
}

const BUILTIN: &[(&str, u8, &str)] = &[
    ("total", 1, include_str!("../../data/class_maps/total_v1.json")),
    ("total", 2, include_str!("../../data/class_maps/total_v2.json")),
    ("body", 1, include_str!("../../data/class_maps/body_v1.json")),
    ("body", 2, include_str!("../../data/class_maps/body_v2.json")),
    ("tissue_types", 2, include_str!("../../data/class_maps/tissue_types_v2.json")),
    ("appendicular_bones", 2, include_str!("../../data/class_maps/appendicular_bones_v2.json")),
    ("bone_tissue_test", 1, include_str!("../../data/class_maps/bone_tissue_test_v1.json")),
];

/// Task names follow the newer convention; version 1 has no separate
/// appendicular/tissue models and serves both from one combined task.
pub fn resolve_task_name(task: &str, version: u8) -> &str {
    match (task, version) {
        ("appendicular_bones" | "tissue_types", 1) => "bone_tissue_test",
        _ => task,
    }
}

/// Load a bundled class map for `task` under segmentation model `version`.
pub fn load_class_map(task: &str, version: u8, append_auxiliary: bool) -> Result<ClassMap> {
    let resolved = resolve_task_name(task, version);
    let text = BUILTIN
        .iter()
        .find(|(t, v, _)| *t == resolved && *v == version)
        .map(|(_, _, text)| *text)
        .ok_or_else(|| Error::UnknownClassMap {
            task: task.to_string(),
            version,
        })?;
    let map = ClassMap::from_json(text)?;
    Ok(if append_auxiliary {
        map
    } else {
        map.without_auxiliary()
    })
}

/// Every bundled (task, version) pair.
pub fn builtin_class_maps() -> impl Iterator<Item = (&'static str, u8)> {
    BUILTIN.iter().map(|(t, v, _)| (*t, *v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtin_maps_validate() {
        for (task, version) in builtin_class_maps() {
            let m = load_class_map(task, version, true).unwrap();
            assert_eq!(m.version, version);
        }
    }

    #[test]
    fn version1_redirects_to_combined_task() {
        let m = load_class_map("appendicular_bones", 1, true).unwrap();
        assert_eq!(m.task_name, "bone_tissue_test");
        let m = load_class_map("tissue_types", 1, true).unwrap();
        assert_eq!(m.task_name, "bone_tissue_test");
    }

    #[test]
    fn auxiliary_appended_by_default() {
        let m = load_class_map("appendicular_bones", 2, true).unwrap();
        assert!(m.names().contains(&"humerus"));
        assert!(m.names().contains(&"ulna"));
        let m = load_class_map("appendicular_bones", 2, false).unwrap();
        assert!(!m.names().contains(&"humerus"));
        assert!(m.auxiliary.is_none());
    }

    #[test]
    fn unknown_combination() {
        assert!(matches!(
            load_class_map("tissue_types", 3, true),
            Err(Error::UnknownClassMap { .. })
        ));
        assert!(load_class_map("nope", 2, true).is_err());
    }

    #[test]
    fn total_v2_lookups() {
        let m = load_class_map("total", 2, true).unwrap();
        assert_eq!(m.entries.len(), 117);
        assert_eq!(m.name_of(5), Some("liver"));
        assert_eq!(m.label_of("vertebrae_L1"), Some(31));
        assert_eq!(m.label_of("hip_left"), Some(77));
    }

    #[test]
    fn rejects_duplicates_and_zero() {
        let bad = r#"{"task":"x","version":2,"entries":{"1":"a","2":"a"}}"#;
        assert!(ClassMap::from_json(bad).is_err());
        let bad = r#"{"task":"x","version":2,"entries":{"0":"a"}}"#;
        assert!(ClassMap::from_json(bad).is_err());
    }
}
