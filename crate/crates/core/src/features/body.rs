use std::collections::BTreeMap;

use ndarray::{s, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::config::TaskEvaConfig;
use super::hu_range::{enforce_fat_range, split_muscle_by_hu};
use crate::error::{Error, Result};
use crate::image_io::VolumeGrid;
use crate::registry::Registry;

/// Part of the volume a composition analysis looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnalysisRegion {
    Whole,
    /// z planes `lower..=upper`
    Slab { lower: usize, upper: usize },
    /// a single z plane (2D analysis)
    Plane { z: usize },
}

/// How the plane of a 2D analysis is picked from the reference mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneMode {
    /// floor((z_min + z_max) / 2)
    #[default]
    Midpoint,
    /// plane with the most mask voxels, lowest z on ties
    MaxCrossSection,
}

/// z index of the central plane of `mask`, `None` for an empty mask.
pub fn central_plane(mask: &Array3<bool>, mode: PlaneMode) -> Option<usize> {
    let counts: Vec<usize> = mask
        .axis_iter(Axis(2))
        .map(|p| p.iter().filter(|b| **b).count())
        .collect();
    let zmin = counts.iter().position(|&c| c > 0)?;
    let zmax = counts.iter().rposition(|&c| c > 0)?;
    Some(match mode {
        PlaneMode::Midpoint => (zmin + zmax) / 2,
        PlaneMode::MaxCrossSection => {
            let best = counts[zmin..=zmax].iter().copied().max().unwrap_or(0);
            zmin + counts[zmin..=zmax].iter().position(|&c| c == best).unwrap_or(0)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentMetrics {
    pub voxels: usize,
    /// set for slab and whole-volume analyses
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_cm3: Option<f64>,
    /// set for plane analyses
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area_cm2: Option<f64>,
    pub mean_hu: Option<f64>,
    pub median_hu: Option<f64>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn region_mask(mask: &Array3<bool>, region: AnalysisRegion) -> Result<Array3<bool>> {
    let k = mask.shape()[2];
    let mut out = Array3::from_elem(mask.raw_dim(), false);
    let (lo, hi) = match region {
        AnalysisRegion::Whole => return Ok(mask.clone()),
        AnalysisRegion::Slab { lower, upper } => (lower, upper),
        AnalysisRegion::Plane { z } => (z, z),
    };
    if lo > hi || hi >= k {
        return Err(Error::InvalidBounds(format!("region {lo}..={hi} outside z range 0..{k}")));
    }
    out.slice_mut(s![.., .., lo..=hi])
        .assign(&mask.slice(s![.., .., lo..=hi]));
    Ok(out)
}

fn metrics(vol: &VolumeGrid, mask: &Array3<bool>, region: AnalysisRegion) -> ComponentMetrics {
    let mut values: Vec<f64> = vol
        .data
        .iter()
        .zip(mask.iter())
        .filter_map(|(v, m)| m.then_some(*v))
        .collect();
    let n = values.len();
    let mean_hu = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
    let median_hu = median(&mut values);
    let (volume_cm3, area_cm2) = match region {
        AnalysisRegion::Plane { .. } => (None, Some(n as f64 * vol.spacing[0] * vol.spacing[1] / 100.0)),
        _ => (Some(n as f64 * vol.voxel_volume() / 1000.0), None),
    };
    ComponentMetrics {
        voxels: n,
        volume_cm3,
        area_cm2,
        mean_hu,
        median_hu,
    }
}

fn is_fat(name: &str, registry: &Registry) -> bool {
    name.ends_with("fat") || registry.graph().ancestors(name).contains(&"fat")
}

/// Volume (or area) and HU statistics of every mask inside `region`.
///
/// With `enforceFatRange` fat masks are clipped to the fat HU range. With
/// `enforceMuscleRange` every muscle mask additionally reports its
/// `/normal_attenuation`, `/low_attenuation` and `/imat` parts.
pub fn body_component_analysis(
    vol: &VolumeGrid,
    masks: &BTreeMap<String, Array3<bool>>,
    task: &TaskEvaConfig,
    region: AnalysisRegion,
    registry: &Registry,
) -> Result<BTreeMap<String, ComponentMetrics>> {
    let ranges = task.hu_ranges()?;
    let mut out = BTreeMap::new();
    for (name, mask) in masks {
        if mask.shape() != vol.data.shape() {
            return Err(Error::ShapeMismatch {
                expected: vol.data.shape().to_vec(),
                found: mask.shape().to_vec(),
            });
        }
        let mut m = region_mask(mask, region)?;
        if task.enforce_fat_range && is_fat(name, registry) {
            m = enforce_fat_range(&m, &vol.data, &ranges)?;
        }
        if task.enforce_muscle_range && registry.is_muscle(name) {
            let split = split_muscle_by_hu(&m, &vol.data, &ranges)?;
            for (suffix, part) in [
                ("normal_attenuation", &split.normal),
                ("low_attenuation", &split.low_attenuation),
                ("imat", &split.imat),
            ] {
                out.insert(format!("{name}/{suffix}"), metrics(vol, part, region));
            }
        }
        out.insert(name.clone(), metrics(vol, &m, region));
    }
    Ok(out)
}
