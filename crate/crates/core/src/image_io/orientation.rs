//! Axis codes and permutation/flip reorientation.
//!
//! Reorientation never interpolates: the voxel grid is permuted and flipped
//! and the affine is updated so every voxel keeps its world position.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

use super::affine::Affine;
use super::volume::VolumeGrid;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisCode {
    L,
    R,
    P,
    A,
    I,
    S,
}

impl AxisCode {
    /// World axis (0 = x/R-L, 1 = y/A-P, 2 = z/S-I) this code lies on.
    pub fn world_axis(self) -> usize {
        match self {
            AxisCode::L | AxisCode::R => 0,
            AxisCode::P | AxisCode::A => 1,
            AxisCode::I | AxisCode::S => 2,
        }
    }

    /// True when the code points along the positive RAS world direction.
    pub fn positive(self) -> bool {
        matches!(self, AxisCode::R | AxisCode::A | AxisCode::S)
    }

    fn from_axis(axis: usize, positive: bool) -> AxisCode {
        match (axis, positive) {
            (0, true) => AxisCode::R,
            (0, false) => AxisCode::L,
            (1, true) => AxisCode::A,
            (1, false) => AxisCode::P,
            (2, true) => AxisCode::S,
            _ => AxisCode::I,
        }
    }

    fn as_char(self) -> char {
        match self {
            AxisCode::L => 'L',
            AxisCode::R => 'R',
            AxisCode::P => 'P',
            AxisCode::A => 'A',
            AxisCode::I => 'I',
            AxisCode::S => 'S',
        }
    }
}

/// Ordered triple of axis codes, one per voxel axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AxCodes(pub [AxisCode; 3]);

impl AxCodes {
    pub const RAS: AxCodes = AxCodes([AxisCode::R, AxisCode::A, AxisCode::S]);
    pub const PLS: AxCodes = AxCodes([AxisCode::P, AxisCode::L, AxisCode::S]);

    pub fn new(codes: [AxisCode; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for c in codes {
            let a = c.world_axis();
            if seen[a] {
                return Err(Error::InvalidAxisCodes(AxCodes(codes).to_string()));
            }
            seen[a] = true;
        }
        Ok(AxCodes(codes))
    }

    /// All 48 valid triples (6 axis permutations x 8 sign patterns).
    pub fn all() -> Vec<AxCodes> {
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut out = Vec::with_capacity(48);
        for p in PERMS {
            for signs in 0..8u8 {
                let codes = [0, 1, 2].map(|i| AxisCode::from_axis(p[i], signs & (1 << i) != 0));
                out.push(AxCodes(codes));
            }
        }
        out
    }
}

impl fmt::Display for AxCodes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.0 {
            write!(f, "{}", c.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for AxCodes {
    type Err = Error;

    /// Accepts "PLS", "PLS+", "P,L,S" and lowercase variants.
    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<char> = s
            .chars()
            .filter(|c| !matches!(c, '+' | ',' | ' ' | '(' | ')' | '\''))
            .map(|c| c.to_ascii_uppercase())
            .collect();
        if letters.len() != 3 {
            return Err(Error::InvalidAxisCodes(s.to_string()));
        }
        let mut codes = [AxisCode::R; 3];
        for (slot, ch) in codes.iter_mut().zip(letters) {
            *slot = match ch {
                'L' => AxisCode::L,
                'R' => AxisCode::R,
                'P' => AxisCode::P,
                'A' => AxisCode::A,
                'I' => AxisCode::I,
                'S' => AxisCode::S,
                _ => return Err(Error::InvalidAxisCodes(s.to_string())),
            };
        }
        AxCodes::new(codes).map_err(|_| Error::InvalidAxisCodes(s.to_string()))
    }
}

impl Serialize for AxCodes {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AxCodes {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Axis codes of the voxel axes of `affine`.
///
/// Columns are normalized to direction cosines; the world axis with the
/// largest absolute cosine is then assigned greedily (largest entry first),
/// which always yields a permutation even for oblique affines.
pub fn orientation_from_affine(affine: &Affine) -> Result<AxCodes> {
    let det = affine.det3();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(Error::SingularAffine(det));
    }
    let norms = affine.column_norms();
    let lin = affine.linear();
    // cos[world][voxel]
    let mut cos = [[0.0f64; 3]; 3];
    for w in 0..3 {
        for v in 0..3 {
            cos[w][v] = lin[w][v] / norms[v];
        }
    }
    let mut codes = [AxisCode::R; 3];
    let mut world_used = [false; 3];
    let mut voxel_used = [false; 3];
    for _ in 0..3 {
        let mut best = (0usize, 0usize, -1.0f64);
        for (w, row) in cos.iter().enumerate() {
            if world_used[w] {
                continue;
            }
            for (v, &c) in row.iter().enumerate() {
                if !voxel_used[v] && c.abs() > best.2 {
                    best = (w, v, c.abs());
                }
            }
        }
        let (w, v, _) = best;
        world_used[w] = true;
        voxel_used[v] = true;
        codes[v] = AxisCode::from_axis(w, cos[w][v] > 0.0);
    }
    Ok(AxCodes(codes))
}

/// For each output axis: the source axis it is read from and whether it is flipped.
fn orientation_transform(current: AxCodes, target: AxCodes) -> [(usize, bool); 3] {
    let mut out = [(0usize, false); 3];
    for (j, t) in target.0.iter().enumerate() {
        let i = current
            .0
            .iter()
            .position(|c| c.world_axis() == t.world_axis())
            .expect("valid axcodes cover every world axis");
        out[j] = (i, current.0[i].positive() != t.positive());
    }
    out
}

/// Permute and flip a 3D array according to `xform`.
fn apply_transform<T: Clone>(data: &Array3<T>, xform: &[(usize, bool); 3]) -> Array3<T> {
    let mut view = data.view().permuted_axes([xform[0].0, xform[1].0, xform[2].0]);
    for (j, &(_, flip)) in xform.iter().enumerate() {
        if flip {
            view.invert_axis(Axis(j));
        }
    }
    view.as_standard_layout().into_owned()
}

/// Affine `T` such that `idx_old = T * idx_new` for the transform.
fn index_transform(xform: &[(usize, bool); 3], old_shape: &[usize]) -> Affine {
    let mut m = [[0.0; 4]; 4];
    for (j, &(i, flip)) in xform.iter().enumerate() {
        if flip {
            m[i][j] = -1.0;
            m[i][3] = (old_shape[i] as f64) - 1.0;
        } else {
            m[i][j] = 1.0;
        }
    }
    m[3][3] = 1.0;
    Affine(m)
}

/// Reorient an array + affine pair; returns the new pair.
pub fn reorient_array<T: Clone>(
    data: &Array3<T>,
    affine: &Affine,
    target: AxCodes,
) -> Result<(Array3<T>, Affine)> {
    let target = AxCodes::new(target.0)?;
    let current = orientation_from_affine(affine)?;
    if current == target {
        return Ok((data.clone(), *affine));
    }
    let xform = orientation_transform(current, target);
    let new_data = apply_transform(data, &xform);
    let new_affine = affine.matmul(&index_transform(&xform, data.shape()));
    Ok((new_data, new_affine))
}

/// Reorient a volume so that `orientation_from_affine(result.affine) == target`.
pub fn reorient_volume(vol: &VolumeGrid, target: AxCodes) -> Result<VolumeGrid> {
    let (data, affine) = reorient_array(&vol.data, &vol.affine, target)?;
    VolumeGrid::new(data, affine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_ras() {
        assert_eq!(orientation_from_affine(&Affine::identity()).unwrap(), AxCodes::RAS);
    }

    #[test]
    fn negated_xy_is_lps() {
        let a = Affine::from_diag([-1.0, -1.0, 1.0]);
        assert_eq!(orientation_from_affine(&a).unwrap().to_string(), "LPS");
    }

    #[test]
    fn swapped_columns() {
        let a = Affine::from_parts([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], [0.0; 3]);
        assert_eq!(orientation_from_affine(&a).unwrap().to_string(), "ARS");
    }

    #[test]
    fn pls_helper_is_pls() {
        assert_eq!(orientation_from_affine(&Affine::pls([1.0, 1.0, 1.0])).unwrap(), AxCodes::PLS);
    }

    #[test]
    fn singular_rejected() {
        let a = Affine::from_diag([1.0, 0.0, 1.0]);
        assert!(matches!(orientation_from_affine(&a), Err(Error::SingularAffine(_))));
    }

    #[test]
    fn parse_codes() {
        assert_eq!("PLS+".parse::<AxCodes>().unwrap(), AxCodes::PLS);
        assert_eq!("r,a,s".parse::<AxCodes>().unwrap(), AxCodes::RAS);
        assert!("RLS".parse::<AxCodes>().is_err());
        assert!("RA".parse::<AxCodes>().is_err());
        assert!("RAX".parse::<AxCodes>().is_err());
    }

    #[test]
    fn all_has_48_unique() {
        let all = AxCodes::all();
        assert_eq!(all.len(), 48);
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 48);
    }

    #[test]
    fn ras_to_pls_corners() {
        let data = Array3::from_shape_fn((2, 3, 4), |(i, j, k)| (i * 100 + j * 10 + k) as f64);
        let vol = VolumeGrid::new(data.clone(), Affine::identity()).unwrap();
        let out = reorient_volume(&vol, AxCodes::PLS).unwrap();
        assert_eq!(out.data.shape(), &[3, 2, 4]);
        assert_eq!(orientation_from_affine(&out.affine).unwrap(), AxCodes::PLS);
        // every corner lands at the same world point
        for &i in &[0usize, 1] {
            for &j in &[0usize, 2] {
                for &k in &[0usize, 3] {
                    let w_old = vol.affine.apply([i as f64, j as f64, k as f64]);
                    // P is -y: new axis 0 = 2 - j; L is -x: new axis 1 = 1 - i
                    let (a, b, c) = (2 - j, 1 - i, k);
                    let w_new = out.affine.apply([a as f64, b as f64, c as f64]);
                    assert_eq!(w_old, w_new);
                    assert_eq!(out.data[[a, b, c]], data[[i, j, k]]);
                }
            }
        }
    }

    #[test]
    fn already_at_target_is_noop() {
        let data = Array3::from_shape_fn((3, 2, 2), |(i, j, k)| (i + j + k) as f64);
        let vol = VolumeGrid::new(data, Affine::pls([1.0, 1.0, 2.0])).unwrap();
        let out = reorient_volume(&vol, AxCodes::PLS).unwrap();
        assert_eq!(out.data, vol.data);
        assert_eq!(out.affine, vol.affine);
    }
}
