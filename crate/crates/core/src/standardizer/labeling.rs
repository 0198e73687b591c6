use std::collections::VecDeque;

use ndarray::{Array2, Array3};

/// 8-connected components of a 2D mask, numbered 1.. in raster order of
/// their first pixel. Returns the label image and the component count.
pub fn label_2d(mask: &Array2<bool>) -> (Array2<u32>, u32) {
    let (h, w) = mask.dim();
    let mut out = Array2::<u32>::zeros((h, w));
    let mut next = 0;
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if !mask[[r, c]] || out[[r, c]] != 0 {
                continue;
            }
            next += 1;
            out[[r, c]] = next;
            queue.push_back((r, c));
            while let Some((y, x)) = queue.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                            continue;
                        }
                        let p = [ny as usize, nx as usize];
                        if mask[p] && out[p] == 0 {
                            out[p] = next;
                            queue.push_back((p[0], p[1]));
                        }
                    }
                }
            }
        }
    }
    (out, next)
}

/// 26-connected components of a 3D mask as C-ordered coordinate lists,
/// ordered by their first voxel.
pub fn components_3d(mask: &Array3<bool>) -> Vec<Vec<[u32; 3]>> {
    let (m, n, k) = mask.dim();
    let mut seen = Array3::from_elem((m, n, k), false);
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for ((i, j, l), &v) in mask.indexed_iter() {
        if !v || seen[[i, j, l]] {
            continue;
        }
        seen[[i, j, l]] = true;
        queue.push_back([i, j, l]);
        let mut comp = Vec::new();
        while let Some(p) = queue.pop_front() {
            comp.push([p[0] as u32, p[1] as u32, p[2] as u32]);
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    for dl in -1i64..=1 {
                        let q = [p[0] as i64 + di, p[1] as i64 + dj, p[2] as i64 + dl];
                        if q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= m as i64 || q[1] >= n as i64 || q[2] >= k as i64 {
                            continue;
                        }
                        let q = [q[0] as usize, q[1] as usize, q[2] as usize];
                        if mask[q] && !seen[q] {
                            seen[q] = true;
                            queue.push_back(q);
                        }
                    }
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_pixels_connect() {
        let m = array![[true, false, false], [false, true, false], [false, false, false]];
        let (l, n) = label_2d(&m);
        assert_eq!(n, 1);
        assert_eq!(l[[1, 1]], 1);
    }

    #[test]
    fn raster_order_numbering() {
        let m = array![[false, false, true], [true, false, false], [true, false, true]];
        let (l, n) = label_2d(&m);
        assert_eq!(n, 3);
        assert_eq!(l[[0, 2]], 1);
        assert_eq!(l[[1, 0]], 2);
        assert_eq!(l[[2, 2]], 3);
    }

    #[test]
    fn corner_touching_voxels_connect_in_3d() {
        let mut m = Array3::from_elem((3, 3, 3), false);
        m[[0, 0, 0]] = true;
        m[[1, 1, 1]] = true;
        m[[2, 2, 0]] = true;
        let c = components_3d(&m);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 3);
        m[[1, 1, 1]] = false;
        assert_eq!(components_3d(&m).len(), 2);
    }
}
