use ndarray::{s, Array3};

use super::bounds::{detect_mask_cropping, CropReport, TouchedSide, VolumeBounds};
use super::labeling::components_3d;
use crate::archive::SparseMask;
use crate::error::{Error, Result};
use crate::image_io::LabelVolume;

pub const BODY_TRUNK_LABEL: u16 = 1;
pub const BODY_EXTREMITIES_LABEL: u16 = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ArmLegSplit {
    pub arms: Vec<SparseMask>,
    pub legs: Vec<SparseMask>,
    pub trunk_cropped: bool,
    /// cropping of the trunk between the bounds, restricted to the
    /// anterior/posterior and lateral sides
    pub trunk_report: CropReport,
}

impl ArmLegSplit {
    pub fn arm_mask(&self, shape: [usize; 3]) -> Array3<bool> {
        dense(&self.arms, shape)
    }

    pub fn leg_mask(&self, shape: [usize; 3]) -> Array3<bool> {
        dense(&self.legs, shape)
    }
}

fn dense(parts: &[SparseMask], shape: [usize; 3]) -> Array3<bool> {
    let mut out = Array3::from_elem(shape, false);
    for m in parts {
        for c in &m.coords {
            out[[c[0] as usize, c[1] as usize, c[2] as usize]] = true;
        }
    }
    out
}

/// Split extremities into arms and legs and check the trunk for cropping.
///
/// Every 26-connected component of the extremity label that overlaps an
/// arm bone (humerus, ulna, radius) is an arm, every other one a leg. The
/// trunk counts as cropped when, between the bounds, it reaches an image
/// border along the first two (in-plane) axes.
pub fn separate_arms_and_legs(
    body: &LabelVolume,
    arm_bones: &Array3<bool>,
    bounds: &VolumeBounds,
    crop_addon: [usize; 3],
) -> Result<ArmLegSplit> {
    let shape = body.shape();
    if arm_bones.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape.to_vec(),
            found: arm_bones.shape().to_vec(),
        });
    }
    let (lower, upper) = bounds.planes()?;
    if upper >= shape[2] {
        return Err(Error::InvalidBounds(format!("upper bound {upper} outside z range 0..{}", shape[2])));
    }
    let extremities = body.mask_of(BODY_EXTREMITIES_LABEL);
    let mut arms = Vec::new();
    let mut legs = Vec::new();
    for coords in components_3d(&extremities) {
        let is_arm = coords
            .iter()
            .any(|c| arm_bones[[c[0] as usize, c[1] as usize, c[2] as usize]]);
        let m = SparseMask {
            coords,
            shape,
            values: None,
            fill_value: None,
        };
        if is_arm {
            arms.push(m);
        } else {
            legs.push(m);
        }
    }

    let trunk = body.labels.slice(s![.., .., lower..=upper]).mapv(|l| l == BODY_TRUNK_LABEL);
    let mut report = detect_mask_cropping(&trunk, crop_addon);
    let in_plane = |v: &mut Vec<TouchedSide>| v.retain(|t| t.axis < 2);
    in_plane(&mut report.transverse);
    in_plane(&mut report.coronal);
    in_plane(&mut report.sagittal);
    report.cropped = !report.touched().is_empty();
    Ok(ArmLegSplit {
        arms,
        legs,
        trunk_cropped: report.cropped,
        trunk_report: report,
    })
}

/// Axis along which the trunk is cut, for picking the control-image plane.
pub fn trunk_crop_axis(report: &CropReport) -> Option<usize> {
    let touched = report.touched();
    touched
        .iter()
        .find(|t| t.axis == 0)
        .or_else(|| touched.first())
        .map(|t| t.axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::Affine;
    use crate::standardizer::bounds::Bound;

    fn bounds(lo: i64, hi: i64) -> VolumeBounds {
        VolumeBounds {
            upper: Bound { anatomy: "u".into(), z: hi },
            lower: Bound { anatomy: "l".into(), z: lo },
        }
    }

    fn block(labels: &mut Array3<u16>, lo: [usize; 3], hi: [usize; 3], v: u16) {
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in lo[2]..hi[2] {
                    labels[[i, j, k]] = v;
                }
            }
        }
    }

    #[test]
    fn four_extremities_two_arms() {
        let mut l = Array3::<u16>::zeros((20, 40, 40));
        block(&mut l, [5, 12, 10], [15, 28, 35], BODY_TRUNK_LABEL);
        block(&mut l, [8, 2, 20], [12, 6, 35], BODY_EXTREMITIES_LABEL);
        block(&mut l, [8, 34, 20], [12, 38, 35], BODY_EXTREMITIES_LABEL);
        block(&mut l, [8, 13, 0], [12, 17, 8], BODY_EXTREMITIES_LABEL);
        block(&mut l, [8, 23, 0], [12, 27, 8], BODY_EXTREMITIES_LABEL);
        let mut bones = Array3::from_elem((20, 40, 40), false);
        bones[[10, 4, 30]] = true;
        bones[[10, 36, 25]] = true;
        let body = LabelVolume::new(l, Affine::pls([1.0; 3]), "body");
        let r = separate_arms_and_legs(&body, &bones, &bounds(12, 30), [0; 3]).unwrap();
        assert_eq!(r.arms.len(), 2);
        assert_eq!(r.legs.len(), 2);
        assert!(r.arms.iter().all(|m| m.coords.iter().all(|c| c[1] < 6 || c[1] >= 34)));
        assert!(!r.trunk_cropped);
        let arms = r.arm_mask([20, 40, 40]);
        let legs = r.leg_mask([20, 40, 40]);
        let ext = body.mask_of(BODY_EXTREMITIES_LABEL);
        ndarray::Zip::from(&arms).and(&legs).and(&ext).for_each(|a, l, e| {
            assert!(!(*a && *l));
            assert_eq!(*a || *l, *e);
        });
    }

    #[test]
    fn no_extremities() {
        let mut l = Array3::<u16>::zeros((10, 10, 10));
        block(&mut l, [3, 3, 0], [7, 7, 10], BODY_TRUNK_LABEL);
        let body = LabelVolume::new(l, Affine::pls([1.0; 3]), "body");
        let r = separate_arms_and_legs(&body, &Array3::from_elem((10, 10, 10), false), &bounds(2, 7), [0; 3]).unwrap();
        assert!(r.arms.is_empty() && r.legs.is_empty());
        assert!(!r.trunk_cropped, "touching z ends is not trunk cropping");
    }

    #[test]
    fn trunk_touching_side_within_bounds() {
        let mut l = Array3::<u16>::zeros((10, 10, 20));
        block(&mut l, [3, 3, 0], [7, 7, 20], BODY_TRUNK_LABEL);
        block(&mut l, [0, 3, 8], [7, 7, 12], BODY_TRUNK_LABEL);
        let body = LabelVolume::new(l, Affine::pls([1.0; 3]), "body");
        let none = Array3::from_elem((10, 10, 20), false);
        let r = separate_arms_and_legs(&body, &none, &bounds(5, 15), [0; 3]).unwrap();
        assert!(r.trunk_cropped);
        assert_eq!(trunk_crop_axis(&r.trunk_report), Some(0));
        let r = separate_arms_and_legs(&body, &none, &bounds(13, 18), [0; 3]).unwrap();
        assert!(!r.trunk_cropped);
    }

    #[test]
    fn invalid_bounds_rejected() {
        let body = LabelVolume::new(Array3::zeros((4, 4, 4)), Affine::pls([1.0; 3]), "body");
        let none = Array3::from_elem((4, 4, 4), false);
        assert!(separate_arms_and_legs(&body, &none, &bounds(-2, 3), [0; 3]).is_err());
    }
}
