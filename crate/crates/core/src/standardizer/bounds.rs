use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

use super::tags::{self, DatasetTag};
use crate::error::{Error, Result};
use crate::image_io::{LabelVolume, WORKING_ORIENTATION};
use crate::registry::{ClassMap, Registry};

/// Bound code for an anatomy touching the image border.
pub const BOUND_CROPPED: i64 = -1;
/// Bound code for an anatomy absent from the label map.
pub const BOUND_MISSING: i64 = -2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub anatomy: String,
    /// z index of the bound plane, or [`BOUND_CROPPED`] / [`BOUND_MISSING`]
    pub z: i64,
}

impl Bound {
    pub fn is_valid(&self) -> bool {
        self.z >= 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeBounds {
    pub upper: Bound,
    pub lower: Bound,
}

impl VolumeBounds {
    pub fn is_valid(&self) -> bool {
        self.upper.is_valid() && self.lower.is_valid()
    }

    /// `(lower, upper)` z planes, failing on error codes.
    pub fn planes(&self) -> Result<(usize, usize)> {
        if !self.is_valid() {
            return Err(Error::InvalidBounds(format!(
                "upper {} / lower {}",
                self.upper.z, self.lower.z
            )));
        }
        Ok((self.lower.z as usize, self.upper.z as usize))
    }

    /// One ledger entry per cropped or missing bound; returns how many.
    pub fn record_tags(&self, tag: &mut DatasetTag, data_id: &str) -> usize {
        let mut n = 0;
        for (bound, cropped, missing) in [
            (&self.upper, tags::UPPER_BOUND_CROPPED, tags::UPPER_BOUND_MISSING),
            (&self.lower, tags::LOWER_BOUND_CROPPED, tags::LOWER_BOUND_MISSING),
        ] {
            let code = match bound.z {
                BOUND_CROPPED => cropped,
                BOUND_MISSING => missing,
                _ => continue,
            };
            tag.add_tag_to_data(code, data_id, tags::SEVERITY_ERROR);
            n += 1;
        }
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

/// One image border touched by a mask: array axis and which end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TouchedSide {
    pub axis: usize,
    pub side: Side,
}

/// Borders touched by the three MIP projections of a mask.
///
/// The transverse projection spans array axes (0, 1), coronal (1, 2) and
/// sagittal (0, 2).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropReport {
    pub transverse: Vec<TouchedSide>,
    pub coronal: Vec<TouchedSide>,
    pub sagittal: Vec<TouchedSide>,
    pub cropped: bool,
}

impl CropReport {
    /// Distinct touched sides over all planes, sorted.
    pub fn touched(&self) -> Vec<TouchedSide> {
        let mut all: Vec<TouchedSide> = self
            .transverse
            .iter()
            .chain(&self.coronal)
            .chain(&self.sagittal)
            .copied()
            .collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn touches_axis(&self, axis: usize) -> bool {
        self.touched().iter().any(|t| t.axis == axis)
    }
}

/// Per-axis inclusive extent of the true voxels.
pub fn mask_extent(mask: &Array3<bool>) -> Option<[(usize, usize); 3]> {
    let mut ext: Option<[(usize, usize); 3]> = None;
    for ((i, j, k), &v) in mask.indexed_iter() {
        if !v {
            continue;
        }
        let p = [i, j, k];
        match &mut ext {
            None => ext = Some([(i, i), (j, j), (k, k)]),
            Some(e) => {
                for d in 0..3 {
                    e[d].0 = e[d].0.min(p[d]);
                    e[d].1 = e[d].1.max(p[d]);
                }
            }
        }
    }
    ext
}

/// Check which image borders the mask's MIP projections reach.
///
/// A side counts as touched when the mask enters the `crop_addon`-wide band
/// at that border (margin 0 means the border row itself).
pub fn detect_mask_cropping(mask: &Array3<bool>, crop_addon: [usize; 3]) -> CropReport {
    let shape = mask.shape();
    let mut report = CropReport::default();
    let planes: [(usize, [usize; 2]); 3] = [(2, [0, 1]), (0, [1, 2]), (1, [0, 2])];
    for (normal, axes) in planes {
        let mip = mask.map_axis(Axis(normal), |lane| lane.iter().any(|&b| b));
        let mut touched = Vec::new();
        for (a2d, &axis) in axes.iter().enumerate() {
            let n = shape[axis];
            let (mut lo, mut hi) = (usize::MAX, 0);
            for (idx, &v) in mip.indexed_iter() {
                if v {
                    let p = if a2d == 0 { idx.0 } else { idx.1 };
                    lo = lo.min(p);
                    hi = hi.max(p);
                }
            }
            if lo == usize::MAX {
                continue;
            }
            if lo <= crop_addon[axis] {
                touched.push(TouchedSide { axis, side: Side::Low });
            }
            if hi + crop_addon[axis] >= n - 1 {
                touched.push(TouchedSide { axis, side: Side::High });
            }
        }
        match normal {
            2 => report.transverse = touched,
            0 => report.coronal = touched,
            _ => report.sagittal = touched,
        }
    }
    report.cropped = !(report.transverse.is_empty() && report.coronal.is_empty() && report.sagittal.is_empty());
    report
}

/// Class-map names denoted by a bound anatomy string.
///
/// An exact name wins; otherwise names starting with `<name>_` (both sides
/// of a bilateral structure) and finally the registry's hierarchy are
/// tried. More than two matches is an error.
pub fn resolve_reference_anatomy(name: &str, class_map: &ClassMap, registry: &Registry) -> Result<Vec<String>> {
    let norm = registry.normalize_anatomy_name(name);
    let names = class_map.names();
    if names.contains(&norm.as_str()) {
        return Ok(vec![norm]);
    }
    let prefix = format!("{norm}_");
    let mut matches: Vec<String> = names
        .iter()
        .filter(|n| n.starts_with(&prefix))
        .map(|n| n.to_string())
        .collect();
    if matches.is_empty() {
        if let Ok(leaves) = registry.expand_selection(&norm) {
            matches = leaves.into_iter().filter(|l| names.contains(&l.as_str())).collect();
        }
    }
    matches.sort();
    match matches.len() {
        0 => Err(Error::UnknownSelector(name.to_string())),
        1 | 2 => Ok(matches),
        _ => Err(Error::AmbiguousAnatomy {
            name: name.to_string(),
            matches,
        }),
    }
}

/// Union mask of the named class-map entries.
pub fn anatomy_mask(labels: &LabelVolume, class_map: &ClassMap, names: &[String]) -> Array3<bool> {
    let ids: Vec<u16> = names.iter().filter_map(|n| class_map.label_of(n)).collect();
    labels.mask_of_any(&ids)
}

/// Bound code or z index for one reference mask.
fn bound_of(mask: &Array3<bool>, crop_addon: [usize; 3], upper: bool) -> i64 {
    match mask_extent(mask) {
        None => BOUND_MISSING,
        Some(ext) => {
            if detect_mask_cropping(mask, crop_addon).cropped {
                BOUND_CROPPED
            } else if upper {
                ext[2].1 as i64
            } else {
                ext[2].0 as i64
            }
        }
    }
}

/// Upper bound = topmost z of the upper reference anatomy, lower bound =
/// lowest z of the lower one; -1 when that anatomy is cropped, -2 when it
/// is absent.
pub fn define_volume_bounds_by_anatomies(
    labels: &LabelVolume,
    class_map: &ClassMap,
    upper_ref: &str,
    lower_ref: &str,
    crop_addon: [usize; 3],
    registry: &Registry,
) -> Result<VolumeBounds> {
    labels.ensure_orientation(WORKING_ORIENTATION)?;
    let up_names = resolve_reference_anatomy(upper_ref, class_map, registry)?;
    let lo_names = resolve_reference_anatomy(lower_ref, class_map, registry)?;
    let upper = Bound {
        anatomy: up_names.join("+"),
        z: bound_of(&anatomy_mask(labels, class_map, &up_names), crop_addon, true),
    };
    let lower = Bound {
        anatomy: lo_names.join("+"),
        z: bound_of(&anatomy_mask(labels, class_map, &lo_names), crop_addon, false),
    };
    if upper.is_valid() && lower.is_valid() && lower.z > upper.z {
        return Err(Error::InvalidBounds(format!(
            "lower bound {} ({}) lies above upper bound {} ({})",
            lower.z, lower.anatomy, upper.z, upper.anatomy
        )));
    }
    Ok(VolumeBounds { upper, lower })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::Affine;
    use crate::registry::load_class_map;

    fn blob(shape: (usize, usize, usize), lo: [usize; 3], hi: [usize; 3]) -> Array3<bool> {
        Array3::from_shape_fn(shape, |(i, j, k)| {
            (lo[0]..=hi[0]).contains(&i) && (lo[1]..=hi[1]).contains(&j) && (lo[2]..=hi[2]).contains(&k)
        })
    }

    #[test]
    fn interior_mask_not_cropped() {
        let r = detect_mask_cropping(&blob((32, 32, 32), [12; 3], [19; 3]), [0; 3]);
        assert!(!r.cropped);
        assert!(r.touched().is_empty());
    }

    #[test]
    fn border_plane_touches() {
        let r = detect_mask_cropping(&blob((32, 32, 32), [0, 10, 10], [5, 20, 20]), [0; 3]);
        assert!(r.cropped);
        assert!(r.sagittal.contains(&TouchedSide { axis: 0, side: Side::Low }));
        assert!(r.transverse.contains(&TouchedSide { axis: 0, side: Side::Low }));
        assert!(r.coronal.is_empty());
    }

    #[test]
    fn margin_band() {
        let m = blob((32, 32, 32), [3, 10, 10], [8, 20, 20]);
        assert!(!detect_mask_cropping(&m, [2, 0, 0]).cropped);
        assert!(detect_mask_cropping(&m, [3, 0, 0]).cropped);
        let m = blob((32, 32, 32), [10, 10, 10], [28, 20, 20]);
        assert!(!detect_mask_cropping(&m, [2, 0, 0]).cropped);
        assert!(detect_mask_cropping(&m, [3, 0, 0]).touched().contains(&TouchedSide { axis: 0, side: Side::High }));
    }

    fn phantom() -> (LabelVolume, ClassMap) {
        let cm = load_class_map("total", 2, true).unwrap();
        let mut labels = Array3::<u16>::zeros((64, 64, 64));
        let l1 = cm.label_of("vertebrae_L1").unwrap();
        let hl = cm.label_of("hip_left").unwrap();
        let hr = cm.label_of("hip_right").unwrap();
        for ((i, j, k), v) in labels.indexed_iter_mut() {
            if (28..36).contains(&i) && (28..36).contains(&j) && (30..=40).contains(&k) {
                *v = l1;
            } else if (20..40).contains(&i) && (10..20).contains(&j) && (5..=12).contains(&k) {
                *v = hl;
            } else if (20..40).contains(&i) && (44..54).contains(&j) && (6..=12).contains(&k) {
                *v = hr;
            }
        }
        (LabelVolume::new(labels, Affine::pls([1.0; 3]), "total"), cm)
    }

    #[test]
    fn bounds_from_phantom() {
        let (lv, cm) = phantom();
        let b = define_volume_bounds_by_anatomies(&lv, &cm, "vertebrae_L1", "pelvic", [0; 3], Registry::builtin()).unwrap();
        assert_eq!(b.upper.z, 40);
        assert_eq!(b.lower.z, 5);
        assert_eq!(b.lower.anatomy, "hip_left+hip_right");
        assert_eq!(b.planes().unwrap(), (5, 40));
    }

    #[test]
    fn missing_and_cropped() {
        let (mut lv, cm) = phantom();
        let hl = cm.label_of("hip_left").unwrap();
        let hr = cm.label_of("hip_right").unwrap();
        let l1 = cm.label_of("vertebrae_L1").unwrap();
        lv.labels.mapv_inplace(|v| if v == hl || v == hr { 0 } else { v });
        for i in 28..36 {
            for j in 28..36 {
                lv.labels[[i, j, 63]] = l1;
            }
        }
        let reg = Registry::builtin();
        let b = define_volume_bounds_by_anatomies(&lv, &cm, "vertebrae_L1", "hip", [0; 3], reg).unwrap();
        assert_eq!(b.upper.z, BOUND_CROPPED);
        assert_eq!(b.lower.z, BOUND_MISSING);
        assert!(b.planes().is_err());
        let mut t = DatasetTag::new();
        assert_eq!(b.record_tags(&mut t, "d"), 2);
        assert!(t.contains(tags::UPPER_BOUND_CROPPED, "d"));
        assert!(t.contains(tags::LOWER_BOUND_MISSING, "d"));
    }

    #[test]
    fn ambiguous_common_string() {
        let (lv, cm) = phantom();
        let reg = Registry::builtin();
        let e = define_volume_bounds_by_anatomies(&lv, &cm, "vertebrae", "hip", [0; 3], reg);
        assert!(matches!(e, Err(Error::AmbiguousAnatomy { .. })));
        let e = define_volume_bounds_by_anatomies(&lv, &cm, "unicorn", "hip", [0; 3], reg);
        assert!(matches!(e, Err(Error::UnknownSelector(_))));
    }

    #[test]
    fn swapped_references_rejected() {
        let (lv, cm) = phantom();
        let e = define_volume_bounds_by_anatomies(&lv, &cm, "hip", "vertebrae_L1", [0; 3], Registry::builtin());
        assert!(matches!(e, Err(Error::InvalidBounds(_))));
    }

    #[test]
    fn requires_working_orientation() {
        let (mut lv, cm) = phantom();
        lv.affine = Affine::identity();
        assert!(define_volume_bounds_by_anatomies(&lv, &cm, "vertebrae_L1", "hip", [0; 3], Registry::builtin()).is_err());
    }
}
