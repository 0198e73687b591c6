use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::bright::{label_areas, segment_bright_objects, BrightObjectParams};
use super::tags::{self, DatasetTag};
use crate::error::{Error, Result};
use crate::image_io::{VolumeGrid, WORKING_ORIENTATION};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProsthesisParams {
    #[serde(flatten)]
    pub bright: BrightObjectParams,
    /// minimum projected area of a prosthesis segment
    pub size_limit_mm2: f64,
}

impl Default for ProsthesisParams {
    fn default() -> Self {
        ProsthesisParams {
            bright: BrightObjectParams::default(),
            size_limit_mm2: 300.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProsthesisReport {
    pub detected: bool,
    pub prosthesis_labels: Vec<u32>,
    pub other_implant_labels: Vec<u32>,
    /// coronal MIP above the lower bound, superior side up; the last row is
    /// the lower-bound plane
    pub image: Array2<f64>,
    pub labels: Array2<u32>,
    /// first z index covered by `image` (its bottom row)
    pub lower_bound: usize,
}

impl ProsthesisReport {
    /// Pixels of any detected bright object.
    pub fn bright_mask(&self) -> Array2<bool> {
        self.labels.mapv(|l| l != 0)
    }

    pub fn prosthesis_mask(&self) -> Array2<bool> {
        self.labels.mapv(|l| l != 0 && self.prosthesis_labels.contains(&l))
    }
}

/// Coronal MIP of z >= `from_z`, flipped so superior is up.
pub fn coronal_mip_above(vol: &VolumeGrid, from_z: usize) -> Array2<f64> {
    let sub = vol.data.slice(s![.., .., from_z..]);
    let mip = sub.map_axis(Axis(0), |lane| lane.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let mut img = mip.reversed_axes();
    img.invert_axis(Axis(0));
    img.as_standard_layout().to_owned()
}

/// Look for metal at and above the lower-bound plane.
///
/// Bright objects reaching the bottom row whose projected area exceeds the
/// size limit count as prosthesis, every other bright object as another
/// implant. On detection the id is recorded as `prosthesisDetected` with
/// severity `Warning` when a ledger is given.
pub fn detect_hip_prosthesis(
    vol: &VolumeGrid,
    lower_bound: usize,
    params: &ProsthesisParams,
    dataset_tag: Option<&mut DatasetTag>,
    data_id: &str,
) -> Result<ProsthesisReport> {
    vol.ensure_orientation(WORKING_ORIENTATION)?;
    let k = vol.shape()[2];
    if lower_bound >= k {
        return Err(Error::InvalidBounds(format!(
            "lower bound {lower_bound} outside z range 0..{k}"
        )));
    }
    let image = coronal_mip_above(vol, lower_bound);
    let labels = segment_bright_objects(&image, &params.bright);
    let areas = label_areas(&labels);
    let pixel_area = vol.spacing[1] * vol.spacing[2];
    let bottom = image.nrows() - 1;
    let mut prosthesis_labels = Vec::new();
    let mut other_implant_labels = Vec::new();
    for lab in 1..areas.len() as u32 {
        let touches_bottom = labels.row(bottom).iter().any(|&l| l == lab);
        if touches_bottom && areas[lab as usize] as f64 * pixel_area >= params.size_limit_mm2 {
            prosthesis_labels.push(lab);
        } else {
            other_implant_labels.push(lab);
        }
    }
    let detected = !prosthesis_labels.is_empty();
    if detected {
        if let Some(t) = dataset_tag {
            t.add_tag_to_data(tags::PROSTHESIS_DETECTED, data_id, tags::SEVERITY_WARNING);
        }
    }
    Ok(ProsthesisReport {
        detected,
        prosthesis_labels,
        other_implant_labels,
        image,
        labels,
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::Affine;
    use ndarray::Array3;

    fn body(shape: (usize, usize, usize)) -> Array3<f64> {
        Array3::from_shape_fn(shape, |(i, j, _)| {
            let (ci, cj) = (shape.0 as f64 / 2.0, shape.1 as f64 / 2.0);
            if ((i as f64 - ci) / (ci - 2.0)).powi(2) + ((j as f64 - cj) / (cj - 2.0)).powi(2) < 1.0 {
                40.0
            } else {
                -1000.0
            }
        })
    }

    #[test]
    fn mip_orientation() {
        let mut d = Array3::zeros((2, 3, 5));
        d[[1, 2, 4]] = 7.0;
        d[[0, 0, 1]] = 5.0;
        let v = VolumeGrid::new(d, Affine::pls([1.0; 3])).unwrap();
        let img = coronal_mip_above(&v, 1);
        assert_eq!(img.dim(), (4, 3));
        assert_eq!(img[[0, 2]], 7.0);
        assert_eq!(img[[3, 0]], 5.0);
    }

    #[test]
    fn rod_through_lower_plane_detected() {
        let mut d = body((30, 40, 50));
        for i in 12..18 {
            for j in 8..16 {
                for k in 5..30 {
                    d[[i, j, k]] = 3000.0;
                }
            }
        }
        let v = VolumeGrid::new(d, Affine::pls([2.0; 3])).unwrap();
        let mut tag = DatasetTag::new();
        let r = detect_hip_prosthesis(&v, 10, &ProsthesisParams::default(), Some(&mut tag), "p3").unwrap();
        assert!(r.detected);
        assert_eq!(r.prosthesis_labels.len(), 1);
        assert!(tag.contains(tags::PROSTHESIS_DETECTED, "p3"));
        assert_eq!(tag.0[tags::PROSTHESIS_DETECTED][tags::SEVERITY_WARNING], vec!["p3"]);
    }

    #[test]
    fn nothing_bright() {
        let v = VolumeGrid::new(body((20, 20, 20)), Affine::pls([1.0; 3])).unwrap();
        let mut tag = DatasetTag::new();
        let r = detect_hip_prosthesis(&v, 3, &ProsthesisParams::default(), Some(&mut tag), "x").unwrap();
        assert!(!r.detected);
        assert!(r.other_implant_labels.is_empty());
        assert!(tag.is_empty());
    }

    #[test]
    fn nodule_above_is_other_implant() {
        let mut d = body((30, 40, 50));
        for i in 13..18 {
            for j in 18..24 {
                for k in 35..41 {
                    d[[i, j, k]] = 2000.0;
                }
            }
        }
        let v = VolumeGrid::new(d, Affine::pls([2.0; 3])).unwrap();
        let r = detect_hip_prosthesis(&v, 10, &ProsthesisParams::default(), None, "x").unwrap();
        assert!(!r.detected);
        assert_eq!(r.other_implant_labels.len(), 1);
    }

    #[test]
    fn lower_bound_out_of_range() {
        let v = VolumeGrid::new(body((10, 10, 10)), Affine::pls([1.0; 3])).unwrap();
        assert!(detect_hip_prosthesis(&v, 10, &ProsthesisParams::default(), None, "x").is_err());
    }
}
