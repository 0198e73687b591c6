use std::collections::BTreeMap;

use ndarray::{Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORMAL_MUSCLE: &str = "normal_muscle";
pub const FAT: &str = "fat";
pub const LOW_ATTENUATION_MUSCLE: &str = "low_attenuation_muscle";

/// Tissue HU windows, both ends inclusive.
///
/// The defaults are the literal published values. Fat's upper end (30)
/// touches normal muscle and the fat range contains the low attenuation
/// range; -30 was probably intended but the literal value is kept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HuRangeDict {
    pub normal_muscle: [f64; 2],
    pub fat: [f64; 2],
    pub low_attenuation_muscle: [f64; 2],
}

impl Default for HuRangeDict {
    fn default() -> Self {
        HuRangeDict {
            normal_muscle: [30.0, 150.0],
            fat: [-190.0, 30.0],
            low_attenuation_muscle: [-29.0, 29.0],
        }
    }
}

fn inside(r: [f64; 2], v: f64) -> bool {
    v >= r[0] && v <= r[1]
}

impl HuRangeDict {
    /// Defaults overridden by whichever entries `overrides` names.
    pub fn with_overrides(overrides: &BTreeMap<String, [f64; 2]>) -> Result<Self> {
        let mut d = HuRangeDict::default();
        for (k, r) in overrides {
            match k.as_str() {
                NORMAL_MUSCLE => d.normal_muscle = *r,
                FAT => d.fat = *r,
                LOW_ATTENUATION_MUSCLE => d.low_attenuation_muscle = *r,
                other => return Err(Error::config(format!("dict_hu_range.{other}"), "unknown tissue kind")),
            }
        }
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            (NORMAL_MUSCLE, self.normal_muscle),
            (FAT, self.fat),
            (LOW_ATTENUATION_MUSCLE, self.low_attenuation_muscle),
        ] {
            if !(r[0] < r[1]) {
                return Err(Error::config(
                    format!("dict_hu_range.{name}"),
                    format!("lower end {} must be below upper end {}", r[0], r[1]),
                ));
            }
        }
        let (n, l) = (self.normal_muscle, self.low_attenuation_muscle);
        if n[0] <= l[1] && l[0] <= n[1] {
            return Err(Error::config(
                "dict_hu_range",
                "normal and low attenuation muscle ranges overlap",
            ));
        }
        Ok(())
    }

    /// Tissue class of one muscle voxel: low attenuation is checked before
    /// normal muscle, fat last.
    pub fn classify_muscle(&self, hu: f64) -> Option<MuscleClass> {
        if inside(self.low_attenuation_muscle, hu) {
            Some(MuscleClass::LowAttenuation)
        } else if inside(self.normal_muscle, hu) {
            Some(MuscleClass::Normal)
        } else if inside(self.fat, hu) {
            Some(MuscleClass::Imat)
        } else {
            None
        }
    }

    pub fn is_fat(&self, hu: f64) -> bool {
        inside(self.fat, hu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuscleClass {
    Normal,
    LowAttenuation,
    /// inter-muscular adipose tissue
    Imat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MuscleSplit {
    pub normal: Array3<bool>,
    pub low_attenuation: Array3<bool>,
    pub imat: Array3<bool>,
}

fn check_shapes(mask: &Array3<bool>, hu: &Array3<f64>) -> Result<()> {
    if mask.shape() != hu.shape() {
        return Err(Error::ShapeMismatch {
            expected: hu.shape().to_vec(),
            found: mask.shape().to_vec(),
        });
    }
    Ok(())
}

/// Partition muscle voxels by HU; voxels outside every range stay unassigned.
pub fn split_muscle_by_hu(muscle: &Array3<bool>, hu: &Array3<f64>, ranges: &HuRangeDict) -> Result<MuscleSplit> {
    check_shapes(muscle, hu)?;
    let class = Zip::from(muscle)
        .and(hu)
        .map_collect(|&m, &v| if m { ranges.classify_muscle(v) } else { None });
    Ok(MuscleSplit {
        normal: class.mapv(|c| c == Some(MuscleClass::Normal)),
        low_attenuation: class.mapv(|c| c == Some(MuscleClass::LowAttenuation)),
        imat: class.mapv(|c| c == Some(MuscleClass::Imat)),
    })
}

/// Keep only fat voxels whose HU lies in the fat range.
pub fn enforce_fat_range(fat: &Array3<bool>, hu: &Array3<f64>, ranges: &HuRangeDict) -> Result<Array3<bool>> {
    check_shapes(fat, hu)?;
    Ok(Zip::from(fat).and(hu).map_collect(|&m, &v| m && ranges.is_fat(v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let r = HuRangeDict::default();
        assert_eq!(r.classify_muscle(100.0), Some(MuscleClass::Normal));
        assert_eq!(r.classify_muscle(0.0), Some(MuscleClass::LowAttenuation));
        assert_eq!(r.classify_muscle(-100.0), Some(MuscleClass::Imat));
        assert_eq!(r.classify_muscle(30.0), Some(MuscleClass::Normal));
        assert_eq!(r.classify_muscle(29.5), Some(MuscleClass::Imat));
        assert_eq!(r.classify_muscle(400.0), None);
        r.validate().unwrap();
    }

    #[test]
    fn split_is_disjoint_and_contained() {
        let hu = Array3::from_shape_fn((4, 4, 4), |(i, j, k)| -250.0 + (i * 16 + j * 4 + k) as f64 * 7.0);
        let muscle = Array3::from_shape_fn((4, 4, 4), |(i, _, _)| i > 0);
        let s = split_muscle_by_hu(&muscle, &hu, &HuRangeDict::default()).unwrap();
        for idx in ndarray::indices((4, 4, 4)) {
            let n = [s.normal[idx], s.low_attenuation[idx], s.imat[idx]].iter().filter(|b| **b).count();
            assert!(n <= 1);
            if n == 1 {
                assert!(muscle[idx]);
            }
        }
    }

    #[test]
    fn fat_clipping() {
        let hu = Array3::from_shape_vec((1, 1, 3), vec![-400.0, -100.0, 10.0]).unwrap();
        let fat = Array3::from_elem((1, 1, 3), true);
        let out = enforce_fat_range(&fat, &hu, &HuRangeDict::default()).unwrap();
        assert_eq!(out.iter().copied().collect::<Vec<_>>(), vec![false, true, true]);
        let empty = Array3::from_elem((1, 1, 3), false);
        assert!(enforce_fat_range(&empty, &hu, &HuRangeDict::default()).unwrap().iter().all(|b| !b));
    }

    #[test]
    fn overrides_and_validation() {
        let mut o = BTreeMap::new();
        o.insert(FAT.to_string(), [-190.0, -30.0]);
        assert_eq!(HuRangeDict::with_overrides(&o).unwrap().fat, [-190.0, -30.0]);
        o.insert(NORMAL_MUSCLE.to_string(), [20.0, 150.0]);
        assert!(HuRangeDict::with_overrides(&o).is_err());
        let mut o = BTreeMap::new();
        o.insert("bone".to_string(), [1.0, 2.0]);
        assert!(HuRangeDict::with_overrides(&o).is_err());
        o.clear();
        o.insert(FAT.to_string(), [5.0, 5.0]);
        assert!(HuRangeDict::with_overrides(&o).is_err());
    }
}
