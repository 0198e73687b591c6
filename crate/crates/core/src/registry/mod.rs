//! Segmentation task settings, class maps, anatomy hierarchy and selector
//! resolution.

mod class_map;
mod graph;
mod seg_config;

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

pub use class_map::{builtin_class_maps, load_class_map, resolve_task_name, ClassMap};
pub use graph::{build_anatomy_graph, AnatomyGraph, Category, Edge, EdgeKind, GraphData, ROOT, TOP_CATEGORIES};
pub use seg_config::{get_seg_config_by_task_name, Resolution, SegConfig};

use crate::error::{Error, Result};

/// Substrings identifying muscle structures in names and their aliases.
pub const MUSCLE_KEYWORDS: [&str; 4] = ["iliopsoas", "erector", "gluteus", "muscle"];

/// Bundled hierarchy, groups and synonyms.
#[derive(Debug)]
pub struct Registry {
    graph: AnatomyGraph,
    synonyms: BTreeMap<String, String>,
    /// lowercase -> canonical spelling for every node and group tag
    canonical: HashMap<String, String>,
}

impl Registry {
    pub fn new(graph: AnatomyGraph, synonyms: BTreeMap<String, String>) -> Self {
        let canonical = graph
            .nodes()
            .iter()
            .chain(graph.groups().keys())
            .map(|n| (n.to_lowercase(), n.clone()))
            .collect();
        Registry {
            graph,
            synonyms,
            canonical,
        }
    }

    pub fn builtin() -> &'static Registry {
        static REG: OnceLock<Registry> = OnceLock::new();
        REG.get_or_init(|| {
            let parse = |s: &str| serde_json::from_str::<serde_json::Value>(s).expect("bundled JSON");
            let graph = build_anatomy_graph(
                &parse(include_str!("../../data/anatomy_hierarchy.json")),
                &parse(include_str!("../../data/anatomy_groups.json")),
            )
            .expect("bundled hierarchy is valid");
            let synonyms = serde_json::from_str(include_str!("../../data/synonyms.json")).expect("bundled JSON");
            Registry::new(graph, synonyms)
        })
    }

    pub fn graph(&self) -> &AnatomyGraph {
        &self.graph
    }

    pub fn synonyms(&self) -> &BTreeMap<String, String> {
        &self.synonyms
    }

    /// Canonical spelling of a user-supplied anatomy or group name.
    ///
    /// Lowercases, turns whitespace and hyphens into underscores, maps
    /// synonyms (also in front of a `_left`/`_right` suffix) and restores
    /// the vocabulary's own casing. Unknown names come back normalized but
    /// otherwise untouched (see [`Registry::resolve_anatomy_name`]).
    pub fn normalize_anatomy_name(&self, name: &str) -> String {
        self.resolve_anatomy_name(name).0
    }

    /// Like [`Registry::normalize_anatomy_name`], also reporting whether the
    /// result is a known node or group (side-qualified names count as known
    /// when their base is).
    pub fn resolve_anatomy_name(&self, name: &str) -> (String, bool) {
        let mut key = String::with_capacity(name.len());
        for c in name.trim().chars() {
            let c = if c.is_whitespace() || c == '-' { '_' } else { c };
            if c == '_' && (key.is_empty() || key.ends_with('_')) {
                continue;
            }
            key.extend(c.to_lowercase());
        }
        while key.ends_with('_') {
            key.pop();
        }
        let resolved = match self.synonyms.get(&key) {
            Some(s) => s.clone(),
            None => match graph::split_side(&key) {
                Some((base, side)) if self.synonyms.contains_key(base) => {
                    format!("{}_{side}", self.synonyms[base])
                }
                _ => key,
            },
        };
        if let Some(c) = self.canonical.get(&resolved.to_lowercase()) {
            return (c.clone(), true);
        }
        let known = graph::split_side(&resolved).is_some_and(|(b, _)| self.canonical.contains_key(b));
        if !known {
            log::debug!("anatomy name '{name}' is not in the bundled vocabulary");
        }
        (resolved, known)
    }

    /// Normalize then expand against the full bundled hierarchy.
    pub fn expand_selection(&self, selector: &str) -> Result<Vec<String>> {
        self.expand_in(&self.graph, selector)
    }

    /// Normalize then expand against another (e.g. restricted) graph.
    pub fn expand_in(&self, graph: &AnatomyGraph, selector: &str) -> Result<Vec<String>> {
        let name = self.normalize_anatomy_name(selector);
        if name.is_empty() {
            return Err(Error::UnknownSelector(selector.to_string()));
        }
        graph.expand(&name).map_err(|e| match e {
            Error::UnknownSelector(_) => Error::UnknownSelector(selector.to_string()),
            other => other,
        })
    }

    /// Whether `name` (or one of its aliases) names a muscle.
    pub fn is_muscle(&self, name: &str) -> bool {
        let lower = name.to_lowercase();
        let hit = |s: &str| MUSCLE_KEYWORDS.iter().any(|k| s.contains(k));
        if hit(&lower) {
            return true;
        }
        let base = graph::split_side(&lower).map_or(lower.as_str(), |(b, _)| b);
        self.synonyms
            .iter()
            .any(|(alias, target)| (target == base || *target == lower) && hit(alias))
    }

    /// Shared category of a set of structures; mixed sets count as soft tissue.
    pub fn category_of_selection<S: AsRef<str>>(&self, names: &[S]) -> Category {
        let mut cats = names.iter().filter_map(|n| self.graph.category_of(n.as_ref()));
        match cats.next() {
            Some(first) if cats.all(|c| c == first) => first,
            _ => Category::SoftTissue,
        }
    }
}
