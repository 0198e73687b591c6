use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::labeling::label_2d;

/// Farid & Simoncelli 5-tap interpolator.
pub const FARID_P: [f64; 5] = [0.030320, 0.249724, 0.439911, 0.249724, 0.030320];
/// Farid & Simoncelli 5-tap first-derivative filter.
pub const FARID_D1: [f64; 5] = [0.104550, 0.292315, 0.0, -0.292315, -0.104550];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BrightObjectParams {
    /// HU at and above which a pixel counts as bright
    pub threshold: f64,
    /// gradient magnitude below `gradient_fraction * threshold` marks
    /// flat interiors used as watershed seeds
    pub gradient_fraction: f64,
}

impl Default for BrightObjectParams {
    fn default() -> Self {
        BrightObjectParams {
            threshold: 1500.0,
            gradient_fraction: 0.25,
        }
    }
}

/// Mirror index with the edge sample repeated (d c b a | a b c d).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

fn correlate_axis(img: &Array2<f64>, taps: &[f64; 5], axis: usize) -> Array2<f64> {
    let (h, w) = img.dim();
    let len = if axis == 0 { h } else { w };
    Array2::from_shape_fn((h, w), |(r, c)| {
        let pos = if axis == 0 { r } else { c } as i64;
        taps.iter()
            .enumerate()
            .map(|(t, &tap)| {
                let q = reflect(pos + t as i64 - 2, len);
                tap * if axis == 0 { img[[q, c]] } else { img[[r, q]] }
            })
            .sum()
    })
}

/// Farid gradient magnitude sqrt(gx^2 + gy^2).
pub fn farid_magnitude(img: &Array2<f64>) -> Array2<f64> {
    let gx = correlate_axis(&correlate_axis(img, &FARID_P, 0), &FARID_D1, 1);
    let gy = correlate_axis(&correlate_axis(img, &FARID_P, 1), &FARID_D1, 0);
    ndarray::Zip::from(&gx).and(&gy).map_collect(|a, b| a.hypot(*b))
}

#[derive(PartialEq)]
struct Item {
    level: f64,
    order: u64,
    idx: (usize, usize),
}

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    // min-heap on (level, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .level
            .total_cmp(&self.level)
            .then_with(|| other.order.cmp(&self.order))
    }
}

const NEIGHBOURS_8: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Marker-based priority-flood watershed on `elevation`. Pixels with a
/// nonzero marker keep it; every other pixel takes the label of the basin
/// that reaches it first.
pub fn watershed(elevation: &Array2<f64>, markers: &Array2<u32>) -> Array2<u32> {
    let (h, w) = elevation.dim();
    let mut out = markers.clone();
    let mut heap = BinaryHeap::new();
    let mut order = 0u64;
    let mut queued = markers.mapv(|m| m != 0);
    for ((r, c), &m) in markers.indexed_iter() {
        if m != 0 {
            heap.push(Item {
                level: elevation[[r, c]],
                order,
                idx: (r, c),
            });
            order += 1;
        }
    }
    while let Some(Item { level, idx: (r, c), .. }) = heap.pop() {
        let lab = out[[r, c]];
        for (dr, dc) in NEIGHBOURS_8 {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                continue;
            }
            let p = [nr as usize, nc as usize];
            if queued[p] {
                continue;
            }
            queued[p] = true;
            out[p] = lab;
            heap.push(Item {
                level: elevation[p].max(level),
                order,
                idx: (p[0], p[1]),
            });
            order += 1;
        }
    }
    out
}

fn erode(mask: &Array2<bool>) -> Array2<bool> {
    let (h, w) = mask.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        mask[[r, c]]
            && NEIGHBOURS_8.iter().all(|&(dr, dc)| {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 || mask[[nr as usize, nc as usize]]
            })
    })
}

fn dilate(mask: &Array2<bool>) -> Array2<bool> {
    let (h, w) = mask.dim();
    Array2::from_shape_fn((h, w), |(r, c)| {
        mask[[r, c]]
            || NEIGHBOURS_8.iter().any(|&(dr, dc)| {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                nr >= 0 && nc >= 0 && nr < h as i64 && nc < w as i64 && mask[[nr as usize, nc as usize]]
            })
    })
}

/// 3x3 opening; pixels outside the image never erode the border.
pub fn binary_opening(mask: &Array2<bool>) -> Array2<bool> {
    dilate(&erode(mask))
}

/// 3x3 closing; pixels outside the image count as foreground for the
/// erosion step, so the border is not eaten.
pub fn binary_closing(mask: &Array2<bool>) -> Array2<bool> {
    erode(&dilate(mask))
}

/// Label bright objects of a 2D image: 0 background, 1..n objects.
///
/// Farid gradient magnitude serves as the watershed elevation. Seeds are
/// flat (low-gradient) regions: bright ones become objects, dark ones
/// background. A bright region without any flat pixel gets its
/// lowest-gradient pixel as seed. Each flooded object is cleaned by a 3x3
/// opening and closing and the result relabeled 8-connected in raster
/// order.
pub fn segment_bright_objects(img: &Array2<f64>, params: &BrightObjectParams) -> Array2<u32> {
    let (h, w) = img.dim();
    let thr = params.threshold;
    let bright = img.mapv(|v| v >= thr);
    if !bright.iter().any(|&b| b) {
        return Array2::zeros((h, w));
    }
    let grad = farid_magnitude(img);
    let g_cut = params.gradient_fraction * thr.abs();
    let flat_bright = ndarray::Zip::from(&bright).and(&grad).map_collect(|&b, &g| b && g < g_cut);
    let (mut markers, mut n_obj) = label_2d(&flat_bright);

    // bright regions too thin to contain a flat pixel
    let (regions, n_regions) = label_2d(&bright);
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n_regions as usize + 1];
    let mut seeded = vec![false; n_regions as usize + 1];
    for ((r, c), &reg) in regions.indexed_iter() {
        if reg == 0 {
            continue;
        }
        if markers[[r, c]] != 0 {
            seeded[reg as usize] = true;
        }
        let g = grad[[r, c]];
        if best[reg as usize].is_none_or(|(bg, _, _)| g < bg) {
            best[reg as usize] = Some((g, r, c));
        }
    }
    for reg in 1..=n_regions as usize {
        if !seeded[reg] {
            if let Some((_, r, c)) = best[reg] {
                n_obj += 1;
                markers[[r, c]] = n_obj;
            }
        }
    }

    let background = n_obj + 1;
    for ((r, c), m) in markers.indexed_iter_mut() {
        if *m == 0 && !bright[[r, c]] && grad[[r, c]] < g_cut {
            *m = background;
        }
    }
    let flooded = watershed(&grad, &markers);

    let mut cleaned = Array2::<bool>::from_elem((h, w), false);
    for lab in 1..=n_obj {
        let mask = flooded.mapv(|l| l == lab);
        let mask = binary_closing(&binary_opening(&mask));
        ndarray::Zip::from(&mut cleaned).and(&mask).for_each(|c, &m| *c |= m);
    }
    label_2d(&cleaned).0
}

/// Pixel count of each label 1..=max.
pub fn label_areas(labels: &Array2<u32>) -> Vec<usize> {
    let n = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut areas = vec![0; n + 1];
    for &l in labels {
        areas[l as usize] += 1;
    }
    areas
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(img: &mut Array2<f64>, cy: f64, cx: f64, rad: f64, v: f64) {
        for ((r, c), p) in img.indexed_iter_mut() {
            if (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2) <= rad * rad {
                *p = v;
            }
        }
    }

    #[test]
    fn farid_taps_are_consistent() {
        assert!((FARID_P.iter().sum::<f64>() - 1.0).abs() < 1e-5);
        assert!(FARID_D1.iter().sum::<f64>().abs() < 1e-12);
        // unit ramp along columns: derivative magnitude is the first moment of d1
        let ramp = Array2::from_shape_fn((9, 9), |(_, c)| c as f64);
        let g = farid_magnitude(&ramp);
        let moment: f64 = FARID_D1.iter().enumerate().map(|(i, d)| d * (i as f64 - 2.0)).sum();
        assert!((g[[4, 4]] - moment.abs()).abs() < 1e-5);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(6, 5), 3);
    }

    #[test]
    fn uniform_image_has_no_objects() {
        let img = Array2::from_elem((20, 20), 40.0);
        assert!(segment_bright_objects(&img, &BrightObjectParams::default()).iter().all(|&l| l == 0));
        let img = Array2::from_elem((20, 20), 3000.0);
        let l = segment_bright_objects(&img, &BrightObjectParams::default());
        assert_eq!(l.iter().copied().max(), Some(1));
    }

    #[test]
    fn two_disks_two_labels() {
        let mut img = Array2::from_elem((60, 80), 200.0);
        disk(&mut img, 20.0, 20.0, 8.0, 2500.0);
        disk(&mut img, 35.0, 60.0, 6.0, 2500.0);
        let l = segment_bright_objects(&img, &BrightObjectParams::default());
        assert_eq!(l.iter().copied().max(), Some(2));
        for (cy, cx, rad) in [(20.0, 20.0, 8.0), (35.0, 60.0, 6.0)] {
            let lab = l[[cy as usize, cx as usize]];
            assert_ne!(lab, 0);
            let (mut inside, mut covered) = (0, 0);
            for ((r, c), &v) in l.indexed_iter() {
                if (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2) <= rad * rad {
                    inside += 1;
                    covered += (v == lab) as usize;
                }
            }
            assert!(covered as f64 >= 0.8 * inside as f64);
        }
    }

    #[test]
    fn bottom_disk_reaches_last_row() {
        let mut img = Array2::from_elem((40, 40), 0.0);
        disk(&mut img, 39.0, 20.0, 7.0, 3000.0);
        let l = segment_bright_objects(&img, &BrightObjectParams::default());
        let lab = l[[36, 20]];
        assert_ne!(lab, 0);
        assert!(l.row(39).iter().any(|&v| v == lab));
    }

    #[test]
    fn thin_object_still_seeded() {
        let mut img = Array2::from_elem((30, 30), 0.0);
        for r in 5..25 {
            img[[r, 10]] = 3000.0;
            img[[r, 11]] = 3000.0;
            img[[r, 12]] = 3000.0;
        }
        let l = segment_bright_objects(&img, &BrightObjectParams::default());
        assert_eq!(l.iter().copied().max(), Some(1));
    }

    #[test]
    fn opening_keeps_border_pixels() {
        let mut m = Array2::from_elem((6, 6), false);
        for c in 0..6 {
            m[[5, c]] = true;
            m[[4, c]] = true;
            m[[3, c]] = true;
        }
        let o = binary_opening(&m);
        assert!(o.row(5).iter().all(|&b| b));
    }
}
