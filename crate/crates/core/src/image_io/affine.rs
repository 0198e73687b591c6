use serde::{Deserialize, Serialize};

/// Homogeneous 4x4 voxel-to-world transform (row-major, world in mm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine(pub [[f64; 4]; 4]);

impl Default for Affine {
    fn default() -> Self {
        Self::identity()
    }
}

impl Affine {
    pub fn identity() -> Self {
        Self::from_diag([1.0, 1.0, 1.0])
    }

    pub fn from_diag(d: [f64; 3]) -> Self {
        let mut m = [[0.0; 4]; 4];
        m[0][0] = d[0];
        m[1][1] = d[1];
        m[2][2] = d[2];
        m[3][3] = 1.0;
        Affine(m)
    }

    /// Affine whose voxel axes point Posterior, Left, Superior with the given
    /// voxel spacing. This is the working orientation of the toolkit.
    pub fn pls(spacing: [f64; 3]) -> Self {
        let mut m = [[0.0; 4]; 4];
        // axis 0 -> -y (posterior), axis 1 -> -x (left), axis 2 -> +z (superior)
        m[1][0] = -spacing[0];
        m[0][1] = -spacing[1];
        m[2][2] = spacing[2];
        m[3][3] = 1.0;
        Affine(m)
    }

    /// Build from a 3x3 linear block and a translation.
    pub fn from_parts(linear: [[f64; 3]; 3], translation: [f64; 3]) -> Self {
        let mut m = [[0.0; 4]; 4];
        for r in 0..3 {
            m[r][..3].copy_from_slice(&linear[r]);
            m[r][3] = translation[r];
        }
        m[3][3] = 1.0;
        Affine(m)
    }

    pub fn linear(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[0][0], m[0][1], m[0][2]],
            [m[1][0], m[1][1], m[1][2]],
            [m[2][0], m[2][1], m[2][2]],
        ]
    }

    pub fn translation(&self) -> [f64; 3] {
        [self.0[0][3], self.0[1][3], self.0[2][3]]
    }

    pub fn column(&self, c: usize) -> [f64; 3] {
        [self.0[0][c], self.0[1][c], self.0[2][c]]
    }

    /// Euclidean norms of the three linear columns (voxel spacing in mm).
    pub fn column_norms(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let col = self.column(c);
            *o = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
        }
        out
    }

    pub fn det3(&self) -> f64 {
        let m = self.linear();
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Map a (possibly fractional) voxel index to world coordinates.
    pub fn apply(&self, idx: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        let mut out = [0.0; 3];
        for (r, o) in out.iter_mut().enumerate() {
            *o = m[r][0] * idx[0] + m[r][1] * idx[1] + m[r][2] * idx[2] + m[r][3];
        }
        out
    }

    pub fn matmul(&self, rhs: &Affine) -> Affine {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        Affine(out)
    }

    pub fn max_abs_diff(&self, other: &Affine) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                d = d.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        d
    }

    /// Flattened row-major copy.
    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            out[r * 4..r * 4 + 4].copy_from_slice(&self.0[r]);
        }
        out
    }

    pub fn from_row_major(v: &[f64]) -> Option<Affine> {
        if v.len() != 16 {
            return None;
        }
        let mut m = [[0.0; 4]; 4];
        for r in 0..4 {
            m[r].copy_from_slice(&v[r * 4..r * 4 + 4]);
        }
        Some(Affine(m))
    }
}
