use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Name of the implicit node every top-level category hangs from.
pub const ROOT: &str = "anatomy";

/// Top-level categories a hierarchy must provide.
pub const TOP_CATEGORIES: [&str; 3] = ["bone", "lung", "soft_tissue"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Hierarchy,
    Group,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

/// Plain node/edge lists; the stored form of a graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphData {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

/// Anatomy hierarchy plus tagged group memberships.
///
/// Hierarchy edges form a tree rooted at [`ROOT`]. Each group member gets an
/// extra edge parallel to its hierarchy edge, tagged with the group name.
#[derive(Clone, Debug, PartialEq)]
pub struct AnatomyGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    groups: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Bone,
    Lung,
    SoftTissue,
}

impl Category {
    fn from_top(name: &str) -> Option<Self> {
        match name {
            "bone" => Some(Category::Bone),
            "lung" => Some(Category::Lung),
            "soft_tissue" => Some(Category::SoftTissue),
            _ => None,
        }
    }
}

/// Build the graph from a nested-map hierarchy and a group definition of the
/// form `{"base": [names], "combined": {tag: [names or tags]}}`.
pub fn build_anatomy_graph(hierarchy: &Value, groups: &Value) -> Result<AnatomyGraph> {
    let top = hierarchy
        .as_object()
        .ok_or_else(|| Error::config("hierarchy", "expected an object"))?;
    for cat in TOP_CATEGORIES {
        if !top.contains_key(cat) {
            return Err(Error::config("hierarchy", format!("missing top-level category '{cat}'")));
        }
    }
    let mut nodes = vec![ROOT.to_string()];
    let mut edges = Vec::new();
    let mut seen = BTreeSet::from([ROOT.to_string()]);
    let mut stack: Vec<(String, &Value, String)> = top
        .iter()
        .rev()
        .map(|(k, v)| (ROOT.to_string(), v, k.clone()))
        .collect();
    while let Some((parent, value, name)) = stack.pop() {
        let path = format!("hierarchy.{name}");
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config(&path, "expected an object"))?;
        if seen.insert(name.clone()) {
            nodes.push(name.clone());
        }
        edges.push(Edge {
            source: parent,
            target: name.clone(),
            kind: EdgeKind::Hierarchy,
            tag: None,
        });
        for (k, v) in obj.iter().rev() {
            stack.push((name.clone(), v, k.clone()));
        }
    }

    let mut tree = AnatomyGraph::from_hierarchy(nodes, &edges)?;
    let defs = parse_group_defs(groups)?;
    let mut resolved = BTreeMap::new();
    for tag in defs.keys() {
        let mut visiting = Vec::new();
        let members = flatten_group(tag, &defs, &tree, &mut visiting)?;
        resolved.insert(tag.clone(), members);
    }
    tree.groups = resolved;
    Ok(tree)
}

fn parse_group_defs(groups: &Value) -> Result<BTreeMap<String, Vec<String>>> {
    let obj = groups
        .as_object()
        .ok_or_else(|| Error::config("groups", "expected an object"))?;
    let names = |v: &Value, path: &str| -> Result<Vec<String>> {
        v.as_array()
            .ok_or_else(|| Error::config(path, "expected a list of names"))?
            .iter()
            .map(|s| {
                s.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::config(path, "expected a string"))
            })
            .collect()
    };
    let mut defs = BTreeMap::new();
    if let Some(base) = obj.get("base") {
        for name in names(base, "groups.base")? {
            defs.insert(name.clone(), vec![name]);
        }
    }
    if let Some(combined) = obj.get("combined") {
        let combined = combined
            .as_object()
            .ok_or_else(|| Error::config("groups.combined", "expected an object"))?;
        for (tag, members) in combined {
            defs.insert(tag.clone(), names(members, &format!("groups.combined.{tag}"))?);
        }
    }
    if let Some(k) = obj.keys().find(|k| *k != "base" && *k != "combined") {
        return Err(Error::config(format!("groups.{k}"), "unknown key"));
    }
    Ok(defs)
}

/// Members of a group reduced to hierarchy nodes, sorted.
fn flatten_group(
    tag: &str,
    defs: &BTreeMap<String, Vec<String>>,
    tree: &AnatomyGraph,
    visiting: &mut Vec<String>,
) -> Result<Vec<String>> {
    if visiting.iter().any(|t| t == tag) {
        return Err(Error::HierarchyCycle(tag.to_string()));
    }
    visiting.push(tag.to_string());
    let mut out = BTreeSet::new();
    for m in &defs[tag] {
        if m != tag && defs.contains_key(m) {
            out.extend(flatten_group(m, defs, tree, visiting)?);
        } else if tree.contains(m) {
            out.insert(m.clone());
        } else {
            return Err(Error::UnknownSelector(m.clone()));
        }
    }
    visiting.pop();
    Ok(out.into_iter().collect())
}

impl AnatomyGraph {
    fn from_hierarchy(nodes: Vec<String>, edges: &[Edge]) -> Result<Self> {
        let index: HashMap<String, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        if index.len() != nodes.len() {
            return Err(Error::config("graph.nodes", "duplicate node names"));
        }
        if !index.contains_key(ROOT) {
            return Err(Error::config("graph.nodes", format!("missing root '{ROOT}'")));
        }
        let lookup = |n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| Error::config("graph.edges", format!("unknown node '{n}'")))
        };
        let mut children = vec![Vec::new(); nodes.len()];
        let mut pairs = Vec::new();
        for e in edges.iter().filter(|e| e.kind == EdgeKind::Hierarchy) {
            let (s, t) = (lookup(&e.source)?, lookup(&e.target)?);
            children[s].push(t);
            pairs.push((s, t));
        }
        check_acyclic(&nodes, &children)?;
        let mut parent = vec![None; nodes.len()];
        for (s, t) in pairs {
            if let Some(p) = parent[t] {
                if p != s {
                    return Err(Error::config(
                        "hierarchy",
                        format!("'{}' appears under both '{}' and '{}'", nodes[t], nodes[p], nodes[s]),
                    ));
                }
            }
            parent[t] = Some(s);
        }
        for ch in &mut children {
            ch.dedup();
        }
        Ok(AnatomyGraph {
            nodes,
            index,
            parent,
            children,
            groups: BTreeMap::new(),
        })
    }

    /// Rebuild from stored node/edge lists, validating structure.
    pub fn from_data(data: &GraphData) -> Result<Self> {
        let mut g = Self::from_hierarchy(data.nodes.clone(), &data.edges)?;
        let mut groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in data.edges.iter().filter(|e| e.kind == EdgeKind::Group) {
            let tag = e
                .tag
                .clone()
                .ok_or_else(|| Error::config("graph.edges", "group edge without tag"))?;
            let t = g
                .index
                .get(&e.target)
                .ok_or_else(|| Error::config("graph.edges", format!("unknown node '{}'", e.target)))?;
            if g.parent[*t].map(|p| g.nodes[p].as_str()) != Some(e.source.as_str()) {
                return Err(Error::config(
                    "graph.edges",
                    format!("group edge {} -> {} has no hierarchy counterpart", e.source, e.target),
                ));
            }
            groups.entry(tag).or_default().insert(e.target.clone());
        }
        g.groups = groups
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect();
        Ok(g)
    }

    pub fn to_data(&self) -> GraphData {
        let mut edges = Vec::new();
        for (i, ch) in self.children.iter().enumerate() {
            for &c in ch {
                edges.push(Edge {
                    source: self.nodes[i].clone(),
                    target: self.nodes[c].clone(),
                    kind: EdgeKind::Hierarchy,
                    tag: None,
                });
            }
        }
        for (tag, members) in &self.groups {
            for m in members {
                let p = self.parent[self.index[m]].expect("group members are never the root");
                edges.push(Edge {
                    source: self.nodes[p].clone(),
                    target: m.clone(),
                    kind: EdgeKind::Group,
                    tag: Some(tag.clone()),
                });
            }
        }
        GraphData {
            nodes: self.nodes.clone(),
            edges,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn is_group(&self, tag: &str) -> bool {
        self.groups.contains_key(tag)
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<String>> {
        &self.groups
    }

    pub fn parent_of(&self, name: &str) -> Option<&str> {
        let i = *self.index.get(name)?;
        self.parent[i].map(|p| self.nodes[p].as_str())
    }

    pub fn children_of(&self, name: &str) -> Vec<&str> {
        match self.index.get(name) {
            Some(&i) => self.children[i].iter().map(|&c| self.nodes[c].as_str()).collect(),
            None => Vec::new(),
        }
    }

    /// Ancestors from the immediate parent up to (and including) the root.
    pub fn ancestors(&self, name: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = self.index.get(name).copied();
        while let Some(i) = cur.and_then(|i| self.parent[i]) {
            out.push(self.nodes[i].as_str());
            cur = Some(i);
        }
        out
    }

    /// All leaves below `name` (itself if it is a leaf), sorted.
    pub fn leaves_under(&self, name: &str) -> Vec<String> {
        let Some(&start) = self.index.get(name) else {
            return Vec::new();
        };
        let mut out = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            if self.children[i].is_empty() {
                if self.nodes[i] != ROOT {
                    out.insert(self.nodes[i].clone());
                }
            } else {
                stack.extend(&self.children[i]);
            }
        }
        out.into_iter().collect()
    }

    /// Expand an already normalized selector into sorted, distinct leaves.
    ///
    /// Accepts node names, group tags and side-qualified names such as
    /// `femur_left`; an unsided name without a sided node of its own is
    /// filtered down to leaves carrying the side token.
    pub fn expand(&self, selector: &str) -> Result<Vec<String>> {
        if self.contains(selector) {
            return Ok(self.leaves_under(selector));
        }
        if let Some(members) = self.groups.get(selector) {
            let mut out = BTreeSet::new();
            for m in members {
                out.extend(self.leaves_under(m));
            }
            return Ok(out.into_iter().collect());
        }
        if let Some((base, side)) = split_side(selector) {
            let leaves = self.expand(base)?;
            let filtered: Vec<String> = leaves
                .into_iter()
                .filter(|l| l.split('_').any(|t| t == side))
                .collect();
            if filtered.is_empty() {
                return Err(Error::EmptySelection(selector.to_string()));
            }
            return Ok(filtered);
        }
        Err(Error::UnknownSelector(selector.to_string()))
    }

    /// Category (bone, lung, soft tissue) under which `name` sits.
    pub fn category_of(&self, name: &str) -> Option<Category> {
        if let Some(c) = Category::from_top(name) {
            return Some(c);
        }
        self.ancestors(name).into_iter().find_map(Category::from_top)
    }

    /// Keep only nodes that are in `vocabulary` or lead to one; names absent
    /// from the hierarchy are attached directly below the root.
    pub fn restricted_to<S: AsRef<str>>(&self, vocabulary: &[S]) -> AnatomyGraph {
        let mut keep = vec![false; self.nodes.len()];
        keep[self.index[ROOT]] = true;
        let mut extra = Vec::new();
        for v in vocabulary {
            let v = v.as_ref();
            match self.index.get(v) {
                Some(&i) => {
                    let mut cur = Some(i);
                    while let Some(c) = cur {
                        if keep[c] {
                            break;
                        }
                        keep[c] = true;
                        cur = self.parent[c];
                    }
                }
                None => extra.push(v.to_string()),
            }
        }
        let mut nodes: Vec<String> = self
            .nodes
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(n, _)| n.clone())
            .collect();
        let mut edges = Vec::new();
        for (i, ch) in self.children.iter().enumerate() {
            for &c in ch.iter().filter(|&&c| keep[c]) {
                edges.push(Edge {
                    source: self.nodes[i].clone(),
                    target: self.nodes[c].clone(),
                    kind: EdgeKind::Hierarchy,
                    tag: None,
                });
            }
        }
        extra.sort();
        extra.dedup();
        for e in extra {
            edges.push(Edge {
                source: ROOT.to_string(),
                target: e.clone(),
                kind: EdgeKind::Hierarchy,
                tag: None,
            });
            nodes.push(e);
        }
        let mut g = Self::from_hierarchy(nodes, &edges).expect("pruning preserves a valid tree");
        g.groups = self
            .groups
            .iter()
            .map(|(t, m)| (t.clone(), m.iter().filter(|n| g.contains(n)).cloned().collect::<Vec<_>>()))
            .filter(|(_, m)| !m.is_empty())
            .collect();
        g
    }
}

/// `femur_left` -> (`femur`, `left`).
pub(crate) fn split_side(name: &str) -> Option<(&str, &str)> {
    for side in ["left", "right"] {
        if let Some(base) = name.strip_suffix(side).and_then(|b| b.strip_suffix('_')) {
            if !base.is_empty() {
                return Some((base, side));
            }
        }
    }
    None
}

fn check_acyclic(nodes: &[String], children: &[Vec<usize>]) -> Result<()> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; nodes.len()];
    for start in 0..nodes.len() {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&c) = children[node].get(*next) {
                *next += 1;
                match state[c] {
                    0 => {
                        state[c] = 1;
                        stack.push((c, 0));
                    }
                    1 => return Err(Error::HierarchyCycle(nodes[c].clone())),
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn small() -> AnatomyGraph {
        let h = json!({
            "bone": {"femur": {"femur_left": {}, "femur_right": {}}, "sacrum": {}},
            "lung": {"lung_left": {}},
            "soft_tissue": {"muscle": {"iliopsoas": {"iliopsoas_left": {}, "iliopsoas_right": {}}}, "liver": {}}
        });
        let g = json!({"base": ["bone", "muscle"], "combined": {"musculoskeletal": ["bone", "muscle"], "all": ["musculoskeletal", "liver"]}});
        build_anatomy_graph(&h, &g).unwrap()
    }

    #[test]
    fn expands_nodes_groups_and_sides() {
        let g = small();
        assert_eq!(g.expand("femur").unwrap(), vec!["femur_left", "femur_right"]);
        assert_eq!(g.expand("femur_left").unwrap(), vec!["femur_left"]);
        assert_eq!(
            g.expand("musculoskeletal").unwrap(),
            vec!["femur_left", "femur_right", "iliopsoas_left", "iliopsoas_right", "sacrum"]
        );
        assert_eq!(g.expand("all").unwrap().len(), 6);
        assert_eq!(g.expand("soft_tissue_left").unwrap(), vec!["iliopsoas_left"]);
        assert!(matches!(g.expand("spleen"), Err(Error::UnknownSelector(_))));
        assert!(matches!(g.expand("sacrum_left"), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn group_edges_parallel_hierarchy() {
        let g = small();
        let data = g.to_data();
        for e in data.edges.iter().filter(|e| e.kind == EdgeKind::Group) {
            assert!(data.edges.iter().any(|h| h.kind == EdgeKind::Hierarchy
                && h.source == e.source
                && h.target == e.target));
        }
        let back = AnatomyGraph::from_data(&data).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn detects_cycles() {
        let data = GraphData {
            nodes: vec![ROOT.into(), "a".into(), "b".into()],
            edges: vec![
                Edge { source: ROOT.into(), target: "a".into(), kind: EdgeKind::Hierarchy, tag: None },
                Edge { source: "a".into(), target: "b".into(), kind: EdgeKind::Hierarchy, tag: None },
                Edge { source: "b".into(), target: "a".into(), kind: EdgeKind::Hierarchy, tag: None },
            ],
        };
        assert!(matches!(AnatomyGraph::from_data(&data), Err(Error::HierarchyCycle(_))));

        let h = json!({"bone": {"a": {"bone": {}}}, "lung": {}, "soft_tissue": {}});
        assert!(matches!(
            build_anatomy_graph(&h, &json!({})),
            Err(Error::HierarchyCycle(_))
        ));
        let groups = json!({"combined": {"x": ["y"], "y": ["x"]}});
        let h = json!({"bone": {}, "lung": {}, "soft_tissue": {}});
        assert!(matches!(build_anatomy_graph(&h, &groups), Err(Error::HierarchyCycle(_))));
    }

    #[test]
    fn requires_top_categories() {
        let h = json!({"bone": {}, "lung": {}});
        assert!(build_anatomy_graph(&h, &json!({})).is_err());
    }

    #[test]
    fn restriction_turns_unsided_parent_into_leaf() {
        let g = small().restricted_to(&["femur", "liver", "custom_thing"]);
        assert_eq!(g.expand("femur").unwrap(), vec!["femur"]);
        assert_eq!(g.expand("bone").unwrap(), vec!["femur"]);
        assert!(!g.contains("sacrum"));
        assert_eq!(g.parent_of("custom_thing"), Some(ROOT));
        assert_eq!(g.groups()["musculoskeletal"], vec!["bone"]);
        assert!(!g.groups().contains_key("muscle"));
    }

    #[test]
    fn categories() {
        let g = small();
        assert_eq!(g.category_of("femur_left"), Some(Category::Bone));
        assert_eq!(g.category_of("lung_left"), Some(Category::Lung));
        assert_eq!(g.category_of("liver"), Some(Category::SoftTissue));
        assert_eq!(g.category_of(ROOT), None);
    }
}
