//! Sparse mask encoding and the `.aarc` archive container.

mod container;
mod sparse;

use std::collections::BTreeMap;

pub use container::{pack_archive, unpack_archive, uses_dense_fallback, ArchiveImage, ArchiveMeta, ArchiveRecord, SCHEMA_VERSION};
pub use sparse::{decode_sparse_mask, encode_sparse_mask, restore_hu_volume, SparseMask};

use crate::error::{Error, Result};
use crate::image_io::{LabelVolume, VolumeGrid};
use crate::registry::{AnatomyGraph, ClassMap, Registry};

/// File extension of archives.
pub const ARCHIVE_EXTENSION: &str = "aarc";

impl ArchiveRecord {
    /// Collect one mask per anatomy present in the label volumes.
    ///
    /// Masks are keyed by anatomy name, so the result does not depend on
    /// which integers a class map uses. When a name occurs in several
    /// sources the first one wins. With `gray`, every mask carries its HU
    /// values; `keep_image` additionally stores the dense image.
    pub fn from_label_volumes(
        data_id: &str,
        sources: &[(&LabelVolume, &ClassMap)],
        gray: Option<&VolumeGrid>,
        keep_image: bool,
        registry: &Registry,
    ) -> Result<ArchiveRecord> {
        let shape = match (sources.first(), gray) {
            (Some((lv, _)), _) => lv.shape(),
            (None, Some(g)) => g.shape(),
            (None, None) => return Err(Error::InvalidParameter("no label volumes given".into())),
        };
        if let Some(g) = gray {
            if g.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape.to_vec(),
                    found: g.shape().to_vec(),
                });
            }
        }
        let mut masks: BTreeMap<String, SparseMask> = BTreeMap::new();
        let mut class_maps = Vec::new();
        for (lv, cm) in sources {
            if lv.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape.to_vec(),
                    found: lv.shape().to_vec(),
                });
            }
            class_maps.push(format!("{}_v{}", cm.task_name, cm.version));
            let mut per_label: BTreeMap<u16, Vec<[u32; 3]>> = BTreeMap::new();
            for ((i, j, k), &l) in lv.labels.indexed_iter() {
                if l != 0 {
                    per_label.entry(l).or_default().push([i as u32, j as u32, k as u32]);
                }
            }
            for (label, coords) in per_label {
                let name = cm.name_of(label).ok_or_else(|| {
                    Error::InvalidClassMap(format!("label {label} is not in class map '{}'", cm.task_name))
                })?;
                if masks.contains_key(name) {
                    log::warn!("{data_id}: '{name}' found in several label maps, keeping the first");
                    continue;
                }
                let (values, fill_value) = match gray {
                    Some(g) => {
                        let vals = coords
                            .iter()
                            .map(|c| g.data[[c[0] as usize, c[1] as usize, c[2] as usize]])
                            .collect::<Vec<_>>();
                        let min = g.data.iter().copied().fold(f64::INFINITY, f64::min);
                        (Some(to_hu_vec(&vals)?), Some(to_hu_vec(&[min])?[0]))
                    }
                    None => (None, None),
                };
                masks.insert(
                    name.to_string(),
                    SparseMask {
                        coords,
                        shape,
                        values,
                        fill_value,
                    },
                );
            }
        }
        let names: Vec<&str> = masks.keys().map(String::as_str).collect();
        let graph = registry.graph().restricted_to(&names).to_data();
        let image = match (gray, keep_image) {
            (Some(g), true) => Some(ArchiveImage {
                data: g.data.clone(),
                affine: g.affine,
            }),
            _ => None,
        };
        Ok(ArchiveRecord {
            shape,
            masks,
            graph,
            image,
            meta: ArchiveMeta {
                data_id: data_id.to_string(),
                class_maps,
                ct_bed_removed: false,
            },
            features: None,
        })
    }

    pub fn anatomy_graph(&self) -> Result<AnatomyGraph> {
        AnatomyGraph::from_data(&self.graph)
    }

    /// Stored masks selected by an anatomy name, group or side-qualified name.
    pub fn query_masks(&self, registry: &Registry, selector: &str) -> Result<BTreeMap<String, SparseMask>> {
        let graph = self.anatomy_graph()?;
        let names = registry.expand_in(&graph, selector)?;
        let out: BTreeMap<String, SparseMask> = names
            .into_iter()
            .filter_map(|n| self.masks.get(&n).map(|m| (n, m.clone())))
            .collect();
        if out.is_empty() {
            return Err(Error::EmptySelection(selector.to_string()));
        }
        Ok(out)
    }

    /// Voxel-wise union of all masks matching `selector`.
    pub fn query_union(&self, registry: &Registry, selector: &str) -> Result<SparseMask> {
        let sel = self.query_masks(registry, selector)?;
        SparseMask::union(sel.values(), self.shape)
    }
}

fn to_hu_vec(values: &[f64]) -> Result<Vec<i16>> {
    values
        .iter()
        .map(|&v| {
            let r = v.round();
            if r.is_finite() && r >= i16::MIN as f64 && r <= i16::MAX as f64 {
                Ok(r as i16)
            } else {
                Err(Error::InvalidParameter(format!("gray value {v} does not fit a 16-bit HU value")))
            }
        })
        .collect()
}
