use ndarray::Array3;

use crate::error::{Error, Result};

/// Binary mask in coordinate (COO) form with optional gray values.
///
/// `coords` are C-ordered (lexicographic in (i, j, k)) and unique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMask {
    pub coords: Vec<[u32; 3]>,
    pub shape: [usize; 3],
    pub values: Option<Vec<i16>>,
    pub fill_value: Option<i16>,
}

fn shape_of<T>(a: &Array3<T>) -> [usize; 3] {
    let s = a.shape();
    [s[0], s[1], s[2]]
}

fn to_hu(v: f64) -> Result<i16> {
    let r = v.round();
    if !r.is_finite() || r < i16::MIN as f64 || r > i16::MAX as f64 {
        return Err(Error::InvalidParameter(format!(
            "gray value {v} does not fit a 16-bit HU value"
        )));
    }
    Ok(r as i16)
}

/// Collect the true voxels of `binary`; with `gray`, also keep their values
/// and the image minimum as fill value. Gray values are rounded to integers.
pub fn encode_sparse_mask(binary: &Array3<bool>, gray: Option<&Array3<f64>>) -> Result<SparseMask> {
    let shape = shape_of(binary);
    if shape.iter().any(|&s| s > u32::MAX as usize) {
        return Err(Error::InvalidParameter("mask axis longer than u32 range".into()));
    }
    if let Some(g) = gray {
        if shape_of(g) != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: g.shape().to_vec(),
            });
        }
    }
    let coords: Vec<[u32; 3]> = binary
        .indexed_iter()
        .filter(|(_, &b)| b)
        .map(|((i, j, k), _)| [i as u32, j as u32, k as u32])
        .collect();
    let (values, fill_value) = match gray {
        Some(g) => {
            let values = coords
                .iter()
                .map(|c| to_hu(g[[c[0] as usize, c[1] as usize, c[2] as usize]]))
                .collect::<Result<Vec<_>>>()?;
            let min = g.iter().copied().fold(f64::INFINITY, f64::min);
            let fill = if min.is_finite() { to_hu(min)? } else { 0 };
            (Some(values), Some(fill))
        }
        None => (None, None),
    };
    Ok(SparseMask {
        coords,
        shape,
        values,
        fill_value,
    })
}

impl SparseMask {
    pub fn count(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.coords {
            if (0..3).any(|d| c[d] as usize >= self.shape[d]) {
                return Err(Error::CoordOutOfShape {
                    coord: *c,
                    shape: self.shape,
                });
            }
        }
        if self.coords.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::CorruptArchive("mask coordinates not strictly C-ordered".into()));
        }
        match (&self.values, self.fill_value) {
            (Some(v), Some(_)) if v.len() == self.coords.len() => Ok(()),
            (None, None) => Ok(()),
            (Some(v), Some(_)) => Err(Error::CorruptArchive(format!(
                "{} gray values for {} voxels",
                v.len(),
                self.coords.len()
            ))),
            _ => Err(Error::CorruptArchive(
                "gray values and fill value must be present together".into(),
            )),
        }
    }

    /// Inclusive per-axis (min, max) index of the mask, `None` when empty.
    pub fn bbox(&self) -> Option<[(usize, usize); 3]> {
        let first = self.coords.first()?;
        let mut b = [(0, 0); 3];
        for d in 0..3 {
            b[d] = (first[d] as usize, first[d] as usize);
        }
        for c in &self.coords {
            for d in 0..3 {
                b[d].0 = b[d].0.min(c[d] as usize);
                b[d].1 = b[d].1.max(c[d] as usize);
            }
        }
        Some(b)
    }

    /// Linear C-order index of every voxel.
    pub(crate) fn flat_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let [_, n, k] = self.shape;
        self.coords
            .iter()
            .map(move |c| (c[0] as usize * n + c[1] as usize) * k + c[2] as usize)
    }

    /// Voxel-wise OR of several masks on the same grid; gray values dropped.
    pub fn union<'a>(masks: impl IntoIterator<Item = &'a SparseMask>, shape: [usize; 3]) -> Result<SparseMask> {
        let mut all = Vec::new();
        for m in masks {
            if m.shape != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape.to_vec(),
                    found: m.shape.to_vec(),
                });
            }
            all.extend_from_slice(&m.coords);
        }
        all.sort_unstable();
        all.dedup();
        Ok(SparseMask {
            coords: all,
            shape,
            values: None,
            fill_value: None,
        })
    }
}

pub fn decode_sparse_mask(m: &SparseMask) -> Result<Array3<bool>> {
    let mut out = Array3::from_elem(m.shape, false);
    for c in &m.coords {
        let idx = [c[0] as usize, c[1] as usize, c[2] as usize];
        match out.get_mut(idx) {
            Some(v) => *v = true,
            None => {
                return Err(Error::CoordOutOfShape {
                    coord: *c,
                    shape: m.shape,
                })
            }
        }
    }
    Ok(out)
}

/// Dense HU array: fill value everywhere, stored values at the mask voxels.
pub fn restore_hu_volume(m: &SparseMask) -> Result<Array3<f64>> {
    let (Some(values), Some(fill)) = (&m.values, m.fill_value) else {
        return Err(Error::MissingGrayValues);
    };
    if values.len() != m.coords.len() {
        return Err(Error::CorruptArchive("gray value count differs from voxel count".into()));
    }
    let mut out = Array3::from_elem(m.shape, f64::from(fill));
    for (c, &v) in m.coords.iter().zip(values) {
        let idx = [c[0] as usize, c[1] as usize, c[2] as usize];
        match out.get_mut(idx) {
            Some(x) => *x = f64::from(v),
            None => {
                return Err(Error::CoordOutOfShape {
                    coord: *c,
                    shape: m.shape,
                })
            }
        }
    }
    Ok(out)
}
