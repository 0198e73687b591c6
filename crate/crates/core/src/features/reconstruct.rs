use ndarray::{s, Array3};

use super::stack::FeatureMapStack;
use crate::error::{Error, Result};

/// Place a feature map computed on a padded crop back into the full grid.
///
/// `cropped` covers the VOI bounding box (`origin`, `size`) padded by
/// `ks` voxels on every side; the padding is dropped and every voxel
/// outside the box is set to `init_value`.
pub fn reconstruct_global_feature_map(
    cropped: &Array3<f64>,
    origin: [usize; 3],
    size: [usize; 3],
    ks: usize,
    full_shape: [usize; 3],
    init_value: f64,
) -> Result<Array3<f64>> {
    let expected: Vec<usize> = size.iter().map(|s| s + 2 * ks).collect();
    if cropped.shape() != expected.as_slice() {
        return Err(Error::ShapeMismatch {
            expected,
            found: cropped.shape().to_vec(),
        });
    }
    if (0..3).any(|d| origin[d] + size[d] > full_shape[d]) {
        return Err(Error::InvalidParameter(format!(
            "box at {origin:?} of size {size:?} exceeds shape {full_shape:?}"
        )));
    }
    let mut out = Array3::from_elem(full_shape, init_value);
    out.slice_mut(s![
        origin[0]..origin[0] + size[0],
        origin[1]..origin[1] + size[1],
        origin[2]..origin[2] + size[2]
    ])
    .assign(&cropped.slice(s![ks..ks + size[0], ks..ks + size[1], ks..ks + size[2]]));
    Ok(out)
}

/// Dense map of one feature, `init_value` outside the VOI.
pub fn dense_feature_map(stack: &FeatureMapStack, condition: &str, feature: &str, init_value: f64) -> Result<Array3<f64>> {
    let values = stack
        .feature(condition, feature)
        .ok_or_else(|| Error::InvalidParameter(format!("no feature '{feature}' under condition '{condition}'")))?;
    let mut out = Array3::from_elem(stack.shape, init_value);
    for (c, v) in stack.coords.iter().zip(values) {
        out[[c[0] as usize, c[1] as usize, c[2] as usize]] = *v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_padded_crop() {
        let full = Array3::from_shape_fn((10, 9, 8), |(i, j, k)| (i * 100 + j * 10 + k) as f64);
        let (origin, size, ks) = ([3, 2, 2], [4, 5, 3], 2);
        let mut padded = Array3::from_elem([size[0] + 4, size[1] + 4, size[2] + 4], -1.0);
        padded
            .slice_mut(s![ks..ks + 4, ks..ks + 5, ks..ks + 3])
            .assign(&full.slice(s![3..7, 2..7, 2..5]));
        let out = reconstruct_global_feature_map(&padded, origin, size, ks, [10, 9, 8], 0.0).unwrap();
        for ((i, j, k), v) in out.indexed_iter() {
            let inside = (3..7).contains(&i) && (2..7).contains(&j) && (2..5).contains(&k);
            assert_eq!(*v, if inside { full[[i, j, k]] } else { 0.0 });
        }
        assert!(reconstruct_global_feature_map(&padded, [7, 2, 2], size, ks, [10, 9, 8], 0.0).is_err());
        assert!(reconstruct_global_feature_map(&padded, origin, size, 1, [10, 9, 8], 0.0).is_err());
    }

    #[test]
    fn dense_from_stack() {
        let mut s = FeatureMapStack::new([2, 2, 2], vec![[0, 0, 1], [1, 1, 0]]);
        s.insert("c", "Mean", vec![3.0, 4.0]).unwrap();
        let d = dense_feature_map(&s, "c", "Mean", -5.0).unwrap();
        assert_eq!(d[[0, 0, 1]], 3.0);
        assert_eq!(d[[1, 1, 0]], 4.0);
        assert_eq!(d[[0, 0, 0]], -5.0);
        assert!(dense_feature_map(&s, "c", "Energy", 0.0).is_err());
    }
}
