use ndarray::{s, Array3};

use super::image::RgbaImage;
use crate::error::{Error, Result};

/// RGBA overlay of one transverse slice of a feature map, channels in [0, 1].
///
/// Masked values are scaled to 1..=255 and divided by 255 into the red
/// channel; green and blue stay 0 and alpha is the mask. A constant slice
/// maps to 1/255.
pub fn render_feature_overlay(fmap: &Array3<f64>, mask: &Array3<bool>, z: usize) -> Result<Array3<f64>> {
    if fmap.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            expected: fmap.shape().to_vec(),
            found: mask.shape().to_vec(),
        });
    }
    if z >= fmap.shape()[2] {
        return Err(Error::InvalidParameter(format!("slice {z} outside 0..{}", fmap.shape()[2])));
    }
    let f = fmap.slice(s![.., .., z]);
    let m = mask.slice(s![.., .., z]);
    let vals: Vec<f64> = f.iter().zip(m.iter()).filter_map(|(v, m)| m.then_some(*v)).collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData(format!("mask is empty on slice {z}")));
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (rows, cols) = f.dim();
    let mut out = Array3::zeros((rows, cols, 4));
    for ((r, c), v) in f.indexed_iter() {
        if !m[[r, c]] {
            continue;
        }
        let scaled = if hi > lo { (v - lo) / (hi - lo) * 254.0 + 1.0 } else { 1.0 };
        out[[r, c, 0]] = scaled / 255.0;
        out[[r, c, 3]] = 1.0;
    }
    Ok(out)
}

/// 8-bit version of an overlay from [`render_feature_overlay`].
pub fn overlay_to_rgba(o: &Array3<f64>) -> RgbaImage {
    let (h, w, _) = o.dim();
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let pixels = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| [q(o[[r, c, 0]]), q(o[[r, c, 1]]), q(o[[r, c, 2]]), q(o[[r, c, 3]])])
        .collect();
    RgbaImage {
        width: w,
        height: h,
        pixels,
    }
}
