use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::image::{RgbaImage, CYAN, MAGENTA, RED, YELLOW};
use crate::error::{Error, Result};
use crate::features::percentile_sorted;
use crate::image_io::{VolumeGrid, WORKING_ORIENTATION};
use crate::standardizer::ProsthesisReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    /// projection along the anterior-posterior axis
    Coronal,
    /// projection along the left-right axis
    Sagittal,
    /// projection along the superior-inferior axis
    Transverse,
}

impl Plane {
    pub fn name(self) -> &'static str {
        match self {
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
            Plane::Transverse => "transverse",
        }
    }
}

/// Plane that shows a trunk cut along `crop_axis`: a cut along the first
/// (anterior-posterior) axis is visible in the sagittal plane, anything
/// else in the coronal plane.
pub fn choose_control_plane(crop_axis: Option<usize>) -> Plane {
    match crop_axis {
        Some(0) => Plane::Sagittal,
        _ => Plane::Coronal,
    }
}

fn orient<T: Clone>(p: Array2<T>, plane: Plane) -> Array2<T> {
    match plane {
        Plane::Transverse => p,
        _ => {
            // (in-plane axis, z) -> rows = z descending
            let mut t = p.reversed_axes();
            t.invert_axis(Axis(0));
            t.as_standard_layout().to_owned()
        }
    }
}

fn normal_axis(plane: Plane) -> Axis {
    match plane {
        Plane::Coronal => Axis(0),
        Plane::Sagittal => Axis(1),
        Plane::Transverse => Axis(2),
    }
}

/// Maximum intensity projection in display orientation (superior up for
/// coronal and sagittal planes).
pub fn mip(data: &Array3<f64>, plane: Plane) -> Array2<f64> {
    let p = data.map_axis(normal_axis(plane), |l| l.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    orient(p, plane)
}

pub fn project_mask(mask: &Array3<bool>, plane: Plane) -> Array2<bool> {
    orient(mask.map_axis(normal_axis(plane), |l| l.iter().any(|b| *b)), plane)
}

/// Display row of plane `z` in coronal and sagittal images.
pub fn z_to_row(z: usize, depth: usize) -> usize {
    depth - 1 - z
}

/// What to draw on a control image.
#[derive(Clone, Copy, Debug, Default)]
pub struct ControlOverlays<'a> {
    /// (lower, upper) bound planes, drawn as red dashed lines
    pub bounds: Option<(usize, usize)>,
    /// prosthesis pixels drawn in yellow (coronal plane only)
    pub prosthesis: Option<&'a ProsthesisReport>,
    /// HU at or above which pixels are ignored when setting the display max
    /// once bright objects were detected
    pub bright_threshold: Option<f64>,
    /// trunk mask, outlined dash-dot in magenta when `trunk_cropped`
    pub trunk: Option<&'a Array3<bool>>,
    pub trunk_cropped: bool,
    pub arms: Option<&'a Array3<bool>>,
    pub legs: Option<&'a Array3<bool>>,
    /// plane of a 2D analysis, drawn as a cyan line
    pub central_plane: Option<usize>,
}

fn display_max(img: &Array2<f64>, excluded: Option<&Array2<bool>>) -> f64 {
    match excluded {
        Some(ex) => {
            let mut v: Vec<f64> = img
                .iter()
                .zip(ex.iter())
                .filter_map(|(v, e)| (!e).then_some(*v))
                .collect();
            if v.is_empty() {
                return img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            v.sort_by(f64::total_cmp);
            percentile_sorted(&v, 99.5)
        }
        None => img.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// MIP control image with quality-control overlays.
///
/// The grey scale runs from the projection minimum to its maximum; once
/// bright objects are detected the maximum is the 99.5th percentile of the
/// remaining pixels so metal does not wash out the anatomy.
pub fn render_control_image(vol: &VolumeGrid, plane: Plane, o: &ControlOverlays) -> Result<RgbaImage> {
    vol.ensure_orientation(WORKING_ORIENTATION)?;
    let shape = vol.shape();
    for m in [o.trunk, o.arms, o.legs].into_iter().flatten() {
        if m.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: m.shape().to_vec(),
            });
        }
    }
    let depth = shape[2];
    let vertical = plane != Plane::Transverse;
    if let Some((lo, hi)) = o.bounds {
        if lo > hi || hi >= depth {
            return Err(Error::InvalidBounds(format!("bounds ({lo}, {hi}) outside z range 0..{depth}")));
        }
    }
    if let Some(z) = o.central_plane {
        if z >= depth {
            return Err(Error::InvalidBounds(format!("central plane {z} outside z range 0..{depth}")));
        }
    }
    let img = mip(&vol.data, plane);
    let detected = o.prosthesis.is_some_and(|p| p.labels.iter().any(|l| *l != 0));
    let excluded = if detected {
        let mut ex = Array2::from_elem(img.raw_dim(), false);
        if let Some(t) = o.bright_threshold {
            ex.zip_mut_with(&img, |e, v| *e = *v >= t);
        }
        if let (Plane::Coronal, Some(p)) = (plane, o.prosthesis) {
            for ((r, c), b) in p.bright_mask().indexed_iter() {
                if *b && r < ex.nrows() && c < ex.ncols() {
                    ex[[r, c]] = true;
                }
            }
        }
        Some(ex)
    } else {
        None
    };
    let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = display_max(&img, excluded.as_ref());
    let gray = if hi > lo {
        img.mapv(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
    } else {
        Array2::zeros(img.raw_dim())
    };
    let mut out = RgbaImage::from_gray(&gray);

    if let (Plane::Coronal, Some(p)) = (plane, o.prosthesis) {
        out.fill_mask(&p.prosthesis_mask(), YELLOW);
    }
    if o.trunk_cropped {
        if let Some(t) = o.trunk {
            out.outline_mask(&project_mask(t, plane), MAGENTA, true);
        }
    }
    if let Some(a) = o.arms {
        out.outline_mask(&project_mask(a, plane), YELLOW, false);
    }
    if let Some(l) = o.legs {
        out.outline_mask(&project_mask(l, plane), MAGENTA, false);
    }
    if vertical {
        if let Some((lo, hi)) = o.bounds {
            out.dashed_row(z_to_row(lo, depth), RED);
            out.dashed_row(z_to_row(hi, depth), RED);
        }
        if let Some(z) = o.central_plane {
            out.solid_row(z_to_row(z, depth), CYAN);
        }
    }
    Ok(out)
}
