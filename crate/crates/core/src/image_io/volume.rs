use ndarray::Array3;

use super::affine::Affine;
use super::orientation::{orientation_from_affine, reorient_array, AxCodes};
use crate::error::{Error, Result};

/// A 3D scalar field with its voxel-to-world affine.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeGrid {
    pub data: Array3<f64>,
    pub affine: Affine,
    /// mm per voxel along each array axis (norms of the affine columns)
    pub spacing: [f64; 3],
}

impl VolumeGrid {
    pub fn new(data: Array3<f64>, affine: Affine) -> Result<Self> {
        let det = affine.det3();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::SingularAffine(det));
        }
        Ok(VolumeGrid {
            data,
            spacing: affine.column_norms(),
            affine,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    /// Volume of one voxel in mm^3.
    pub fn voxel_volume(&self) -> f64 {
        self.affine.det3().abs()
    }

    pub fn orientation(&self) -> Result<AxCodes> {
        orientation_from_affine(&self.affine)
    }

    /// Fails unless the volume is in the given orientation.
    pub fn ensure_orientation(&self, expected: AxCodes) -> Result<()> {
        ensure_orientation(&self.affine, expected)
    }
}

pub(crate) fn ensure_orientation(affine: &Affine, expected: AxCodes) -> Result<()> {
    let found = orientation_from_affine(affine)?;
    if found != expected {
        return Err(Error::WrongOrientation {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Integer segmentation labels sharing the grid of a companion volume.
/// Zero is background.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    pub labels: Array3<u16>,
    pub affine: Affine,
    pub class_map_name: String,
}

impl LabelVolume {
    pub fn new(labels: Array3<u16>, affine: Affine, class_map_name: impl Into<String>) -> Self {
        LabelVolume {
            labels,
            affine,
            class_map_name: class_map_name.into(),
        }
    }

    /// Convert a scalar volume holding non-negative integers into labels.
    pub fn from_volume(vol: &VolumeGrid, class_map_name: impl Into<String>) -> Result<Self> {
        let mut bad = None;
        let labels = vol.data.mapv(|v| {
            if v < 0.0 || v.fract() != 0.0 || v > u16::MAX as f64 {
                bad.get_or_insert(v);
                0
            } else {
                v as u16
            }
        });
        if let Some(v) = bad {
            return Err(Error::InvalidParameter(format!(
                "label volume contains non-label value {v}"
            )));
        }
        Ok(LabelVolume::new(labels, vol.affine, class_map_name))
    }

    pub fn to_volume(&self) -> VolumeGrid {
        VolumeGrid {
            data: self.labels.mapv(f64::from),
            affine: self.affine,
            spacing: self.affine.column_norms(),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.labels.shape();
        [s[0], s[1], s[2]]
    }

    pub fn mask_of(&self, label: u16) -> Array3<bool> {
        self.labels.mapv(|l| l == label)
    }

    pub fn mask_of_any(&self, labels: &[u16]) -> Array3<bool> {
        self.labels.mapv(|l| l != 0 && labels.contains(&l))
    }

    pub fn reorient(&self, target: AxCodes) -> Result<LabelVolume> {
        let (labels, affine) = reorient_array(&self.labels, &self.affine, target)?;
        Ok(LabelVolume::new(labels, affine, self.class_map_name.clone()))
    }

    pub fn ensure_orientation(&self, expected: AxCodes) -> Result<()> {
        ensure_orientation(&self.affine, expected)
    }
}
