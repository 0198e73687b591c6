use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub type Rgba = [u8; 4];

pub const RED: Rgba = [230, 30, 30, 255];
pub const YELLOW: Rgba = [255, 220, 0, 255];
pub const MAGENTA: Rgba = [220, 0, 220, 255];
pub const CYAN: Rgba = [0, 200, 220, 255];

/// 8-bit RGBA raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbaImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgba>,
}

impl RgbaImage {
    pub fn new(width: usize, height: usize, fill: Rgba) -> Self {
        RgbaImage {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    /// Grey image from values in [0, 1].
    pub fn from_gray(g: &Array2<f64>) -> Self {
        let (h, w) = g.dim();
        let pixels = g
            .iter()
            .map(|v| {
                let b = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                [b, b, b, 255]
            })
            .collect();
        RgbaImage {
            width: w,
            height: h,
            pixels,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Rgba {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, c: Rgba) {
        if row < self.height && col < self.width {
            self.pixels[row * self.width + col] = c;
        }
    }

    /// Horizontal dashed line (4 on, 4 off).
    pub fn dashed_row(&mut self, row: usize, c: Rgba) {
        for col in 0..self.width {
            if (col / 4) % 2 == 0 {
                self.set(row, col, c);
            }
        }
    }

    pub fn solid_row(&mut self, row: usize, c: Rgba) {
        for col in 0..self.width {
            self.set(row, col, c);
        }
    }

    /// Colour every pixel where `mask` is set.
    pub fn fill_mask(&mut self, mask: &Array2<bool>, c: Rgba) {
        for ((r, col), m) in mask.indexed_iter() {
            if *m {
                self.set(r, col, c);
            }
        }
    }

    /// Outline of `mask` (4-neighbour boundary). With `dash_dot` the outline
    /// follows a dash-dot pattern along the image diagonal.
    pub fn outline_mask(&mut self, mask: &Array2<bool>, c: Rgba, dash_dot: bool) {
        for (r, col) in boundary(mask) {
            let phase = (r + col) % 8;
            if !dash_dot || phase < 4 || phase == 6 {
                self.set(r, col, c);
            }
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Balanced);
            let mut w = enc.write_header()?;
            let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
            w.write_image_data(&flat)?;
            w.finish()?;
        }
        Ok(out)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let bytes = self.encode_png()?;
        let f = File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut w = BufWriter::new(f);
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }
}

/// Mask pixels with at least one 4-neighbour outside the mask or image.
pub fn boundary(mask: &Array2<bool>) -> Vec<(usize, usize)> {
    let (h, w) = mask.dim();
    let mut out = Vec::new();
    for ((r, c), m) in mask.indexed_iter() {
        if !*m {
            continue;
        }
        let edge = r == 0
            || c == 0
            || r + 1 == h
            || c + 1 == w
            || !mask[[r - 1, c]]
            || !mask[[r + 1, c]]
            || !mask[[r, c - 1]]
            || !mask[[r, c + 1]];
        if edge {
            out.push((r, c));
        }
    }
    out
}

/// Box plot of several groups, one box per group, no text.
///
/// Boxes span the quartiles with the median drawn across; whiskers reach
/// the extreme values.
pub fn render_boxplot(groups: &[&[f64]], height: usize) -> Result<RgbaImage> {
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InsufficientData("box plot needs non-empty groups".into()));
    }
    let lo = groups.iter().flat_map(|g| g.iter()).copied().fold(f64::INFINITY, f64::min);
    let hi = groups.iter().flat_map(|g| g.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (box_w, gap) = (20usize, 10usize);
    let width = groups.len() * (box_w + gap) + gap;
    let mut img = RgbaImage::new(width, height, [255, 255, 255, 255]);
    let row_of = |v: f64| {
        let t = (v - lo) / span;
        ((1.0 - t) * (height - 1) as f64).round() as usize
    };
    let black = [0, 0, 0, 255];
    for (i, g) in groups.iter().enumerate() {
        let mut s = g.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| crate::features::percentile_sorted(&s, p);
        let x0 = gap + i * (box_w + gap);
        let mid = x0 + box_w / 2;
        let (r_min, r_q1, r_med, r_q3, r_max) = (row_of(s[0]), row_of(q(25.0)), row_of(q(50.0)), row_of(q(75.0)), row_of(s[s.len() - 1]));
        for r in r_max..=r_min {
            img.set(r, mid, black);
        }
        for r in r_q3..=r_q1 {
            for c in x0..x0 + box_w {
                let edge = r == r_q3 || r == r_q1 || c == x0 || c + 1 == x0 + box_w;
                img.set(r, c, if edge { black } else { [200, 200, 230, 255] });
            }
        }
        for c in x0..x0 + box_w {
            img.set(r_med, c, RED);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_deterministic_and_decodable() {
        let g = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 / 34.0);
        let img = RgbaImage::from_gray(&g);
        let a = img.encode_png().unwrap();
        let b = img.encode_png().unwrap();
        assert_eq!(a, b);
        let dec = png::Decoder::new(std::io::Cursor::new(a));
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (7, 5));
        assert_eq!(&buf[..4], &[0, 0, 0, 255]);
    }

    #[test]
    fn boundary_of_block() {
        let mut m = Array2::from_elem((5, 5), false);
        for r in 1..4 {
            for c in 1..4 {
                m[[r, c]] = true;
            }
        }
        let b = boundary(&m);
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&(2, 2)));
    }

    #[test]
    fn boxplot_shape() {
        let img = render_boxplot(&[&[1.0, 2.0, 3.0], &[0.5, 0.9]], 50).unwrap();
        assert_eq!((img.width, img.height), (70, 50));
        assert!(render_boxplot(&[], 10).is_err());
    }
}
