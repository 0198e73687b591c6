use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::error::{Error, Result};

/// Voxel feature vectors of one VOI under several extraction conditions.
///
/// Every vector is aligned with `coords` (C-ordered voxel indices).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureMapStack {
    pub shape: [usize; 3],
    pub coords: Vec<[u32; 3]>,
    /// condition id -> feature name -> per-voxel values
    pub conditions: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
}

impl FeatureMapStack {
    pub fn new(shape: [usize; 3], coords: Vec<[u32; 3]>) -> Self {
        FeatureMapStack {
            shape,
            coords,
            conditions: BTreeMap::new(),
        }
    }

    /// Number of VOI voxels.
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn insert(&mut self, condition: &str, feature: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.n()],
                found: vec![values.len()],
            });
        }
        self.conditions
            .entry(condition.to_string())
            .or_default()
            .insert(feature.to_string(), values);
        Ok(())
    }

    pub fn condition_ids(&self) -> Vec<&str> {
        self.conditions.keys().map(String::as_str).collect()
    }

    pub fn feature(&self, condition: &str, feature: &str) -> Option<&[f64]> {
        self.conditions
            .get(condition)
            .and_then(|m| m.get(feature))
            .map(Vec::as_slice)
    }

    /// Features present under every condition, sorted.
    pub fn feature_names(&self) -> Vec<String> {
        let mut it = self.conditions.values();
        let Some(first) = it.next() else {
            return Vec::new();
        };
        let mut common: BTreeSet<&String> = first.keys().collect();
        for m in it {
            common.retain(|k| m.contains_key(*k));
        }
        common.into_iter().cloned().collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::InsufficientData(format!(
                "feature stack needs at least 2 voxels, has {}",
                self.n()
            )));
        }
        for (c, m) in &self.conditions {
            for (f, v) in m {
                if v.len() != self.n() {
                    return Err(Error::InvalidParameter(format!(
                        "feature '{f}' of condition '{c}' has {} values for {} voxels",
                        v.len(),
                        self.n()
                    )));
                }
            }
        }
        for c in &self.coords {
            if (0..3).any(|d| c[d] as usize >= self.shape[d]) {
                return Err(Error::CoordOutOfShape {
                    coord: *c,
                    shape: self.shape,
                });
            }
        }
        Ok(())
    }

    /// One row per voxel and condition: `x,y,z,<features...>,condition`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let names = self.feature_names();
        write!(out, "x,y,z")?;
        for n in &names {
            write!(out, ",{n}")?;
        }
        writeln!(out, ",condition")?;
        for (cond, maps) in &self.conditions {
            for (i, c) in self.coords.iter().enumerate() {
                write!(out, "{},{},{}", c[0], c[1], c[2])?;
                for n in &names {
                    write!(out, ",{}", maps[n][i])?;
                }
                writeln!(out, ",{cond}")?;
            }
        }
        Ok(())
    }
}
