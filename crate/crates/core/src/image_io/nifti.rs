//! Minimal NIfTI-1 single-file (.nii / .nii.gz) reader and writer.
//!
//! Reading honours either byte order, sform before qform, and the scale
//! slope/intercept. Writing is always little-endian; the full double
//! precision affine is kept in a comment extension next to the float32 sform
//! so round trips are exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{Array3, ShapeBuilder};

use super::affine::Affine;
use super::volume::{LabelVolume, VolumeGrid};
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const AFFINE_EXT_TAG: &str = "aarchive:affine64";
const ECODE_COMMENT: i32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Datatype {
    U8,
    I8,
    I16,
    U16,
    I32,
    U32,
    I64,
    U64,
    F32,
    F64,
}

impl Datatype {
    fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::U8,
            4 => Datatype::I16,
            8 => Datatype::I32,
            16 => Datatype::F32,
            64 => Datatype::F64,
            256 => Datatype::I8,
            512 => Datatype::U16,
            768 => Datatype::U32,
            1024 => Datatype::I64,
            1280 => Datatype::U64,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    fn code(self) -> i16 {
        match self {
            Datatype::U8 => 2,
            Datatype::I16 => 4,
            Datatype::I32 => 8,
            Datatype::F32 => 16,
            Datatype::F64 => 64,
            Datatype::I8 => 256,
            Datatype::U16 => 512,
            Datatype::U32 => 768,
            Datatype::I64 => 1024,
            Datatype::U64 => 1280,
        }
    }

    fn size(self) -> usize {
        match self {
            Datatype::U8 | Datatype::I8 => 1,
            Datatype::I16 | Datatype::U16 => 2,
            Datatype::I32 | Datatype::U32 | Datatype::F32 => 4,
            Datatype::I64 | Datatype::U64 | Datatype::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], le: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let mut raw = [0u8; $n];
                raw.copy_from_slice(&b[..$n]);
                if le {
                    <$t>::from_le_bytes(raw) as f64
                } else {
                    <$t>::from_be_bytes(raw) as f64
                }
            }};
        }
        match self {
            Datatype::U8 => b[0] as f64,
            Datatype::I8 => b[0] as i8 as f64,
            Datatype::I16 => num!(i16, 2),
            Datatype::U16 => num!(u16, 2),
            Datatype::I32 => num!(i32, 4),
            Datatype::U32 => num!(u32, 4),
            Datatype::I64 => num!(i64, 8),
            Datatype::U64 => num!(u64, 8),
            Datatype::F32 => num!(f32, 4),
            Datatype::F64 => num!(f64, 8),
        }
    }

    /// Narrowest type that stores every value exactly.
    fn narrowest_for(values: &Array3<f64>) -> Datatype {
        let integral = values.iter().all(|v| v.fract() == 0.0);
        if integral {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if values.is_empty() || (lo >= i16::MIN as f64 && hi <= i16::MAX as f64) {
                return Datatype::I16;
            }
            if lo >= i32::MIN as f64 && hi <= i32::MAX as f64 {
                return Datatype::I32;
            }
        }
        if values.iter().all(|&v| (v as f32) as f64 == v || v.is_nan()) {
            Datatype::F32
        } else {
            Datatype::F64
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            Datatype::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            Datatype::I32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            Datatype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Datatype::F64 => out.extend_from_slice(&v.to_le_bytes()),
            _ => unreachable!("writer only emits i16/i32/f32/f64"),
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    le: bool,
}

impl Reader<'_> {
    fn i16(&self, off: usize) -> i16 {
        let raw = [self.buf[off], self.buf[off + 1]];
        if self.le {
            i16::from_le_bytes(raw)
        } else {
            i16::from_be_bytes(raw)
        }
    }

    fn i32(&self, off: usize) -> i32 {
        let mut raw = [0u8; 4];
        raw.copy_from_slice(&self.buf[off..off + 4]);
        if self.le {
            i32::from_le_bytes(raw)
        } else {
            i32::from_be_bytes(raw)
        }
    }

    fn f32(&self, off: usize) -> f64 {
        let mut raw = [0u8; 4];
        raw.copy_from_slice(&self.buf[off..off + 4]);
        (if self.le {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        }) as f64
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

fn load_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let raw = fs::read(path)?;
    if is_gzip(&raw) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::MalformedHeader(format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn quaternion_affine(r: &Reader<'_>, pixdim: [f64; 4]) -> Affine {
    let (b, c, d) = (r.f32(256), r.f32(260), r.f32(264));
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let rot = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ];
    let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let scale = [pixdim[1], pixdim[2], pixdim[3] * qfac];
    let mut lin = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            lin[i][j] = rot[i][j] * scale[j];
        }
    }
    Affine::from_parts(lin, [r.f32(268), r.f32(272), r.f32(276)])
}

fn parse_extension_affine(buf: &[u8], le: bool, vox_offset: usize) -> Option<Affine> {
    if buf.len() < HEADER_SIZE + 4 || buf[HEADER_SIZE] == 0 {
        return None;
    }
    let r = Reader { buf, le };
    let mut off = HEADER_SIZE + 4;
    while off + 8 <= vox_offset.min(buf.len()) {
        let esize = r.i32(off) as usize;
        let ecode = r.i32(off + 4);
        if esize < 8 || off + esize > buf.len() {
            return None;
        }
        if ecode == ECODE_COMMENT {
            let text = String::from_utf8_lossy(&buf[off + 8..off + esize]);
            let text = text.trim_end_matches('\0');
            if let Some(rest) = text.strip_prefix(AFFINE_EXT_TAG) {
                let vals: Vec<f64> = rest
                    .split_whitespace()
                    .filter_map(|t| t.parse().ok())
                    .collect();
                return Affine::from_row_major(&vals);
            }
        }
        off += esize;
    }
    None
}

/// Read a NIfTI-1 volume (optionally gzip-compressed) as f64 voxels.
pub fn read_volume(path: impl AsRef<Path>) -> Result<VolumeGrid> {
    let buf = load_bytes(path.as_ref())?;
    if buf.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "file has {} bytes, header needs {HEADER_SIZE}",
            buf.len()
        )));
    }
    let le = if i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) == HEADER_SIZE as i32 {
        true
    } else if i32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) == HEADER_SIZE as i32 {
        false
    } else {
        return Err(Error::MalformedHeader("sizeof_hdr is not 348".into()));
    };
    let magic = &buf[344..348];
    if magic != b"n+1\0" {
        return Err(Error::MalformedHeader(format!(
            "magic {:?} is not single-file NIfTI-1",
            String::from_utf8_lossy(magic)
        )));
    }
    let r = Reader { buf: &buf, le };

    let ndim = r.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::MalformedHeader(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for (d, slot) in dims.iter_mut().enumerate() {
        if (d as i16) < ndim {
            let v = r.i16(42 + 2 * d as usize);
            if v < 1 {
                return Err(Error::MalformedHeader(format!("dim[{}] = {v}", d + 1)));
            }
            *slot = v as usize;
        }
    }
    for d in 3..ndim as usize {
        if r.i16(42 + 2 * d) > 1 {
            return Err(Error::MalformedHeader(
                "volumes with more than three dimensions are not supported".into(),
            ));
        }
    }

    let dtype = Datatype::from_code(r.i16(70))?;
    let pixdim = [r.f32(76), r.f32(80), r.f32(84), r.f32(88)];
    let vox_offset = r.f32(108) as usize;
    let slope = r.f32(112);
    let inter = r.f32(116);
    let qform_code = r.i16(252);
    let sform_code = r.i16(254);

    let sform = || {
        let mut m = [[0.0; 4]; 4];
        for (row, base) in [280usize, 296, 312].iter().enumerate() {
            for c in 0..4 {
                m[row][c] = r.f32(base + 4 * c);
            }
        }
        m[3][3] = 1.0;
        Affine(m)
    };
    let header_affine = if sform_code > 0 {
        sform()
    } else if qform_code > 0 {
        quaternion_affine(&r, pixdim)
    } else {
        Affine::from_diag([
            if pixdim[1] > 0.0 { pixdim[1] } else { 1.0 },
            if pixdim[2] > 0.0 { pixdim[2] } else { 1.0 },
            if pixdim[3] > 0.0 { pixdim[3] } else { 1.0 },
        ])
    };
    // The exact affine is only trusted while it still agrees with the header.
    let affine = match parse_extension_affine(&buf, le, vox_offset) {
        Some(exact) if exact.max_abs_diff(&header_affine) <= 1e-3 * (1.0 + max_abs(&exact)) => {
            exact
        }
        _ => header_affine,
    };

    let n = dims[0] * dims[1] * dims[2];
    let need = vox_offset + n * dtype.size();
    if vox_offset < HEADER_SIZE || buf.len() < need {
        return Err(Error::MalformedHeader(format!(
            "voxel data truncated: need {need} bytes, file has {}",
            buf.len()
        )));
    }
    let scale = slope != 0.0 && !(slope == 1.0 && inter == 0.0);
    let values: Vec<f64> = buf[vox_offset..need]
        .chunks_exact(dtype.size())
        .map(|b| {
            let v = dtype.decode(b, le);
            if scale {
                v * slope + inter
            } else {
                v
            }
        })
        .collect();
    let data = Array3::from_shape_vec((dims[0], dims[1], dims[2]).f(), values)
        .expect("length checked above")
        .as_standard_layout()
        .into_owned();
    VolumeGrid::new(data, affine)
}

/// Read a label map; voxel values must be non-negative integers.
pub fn read_label_volume(
    path: impl AsRef<Path>,
    class_map_name: impl Into<String>,
) -> Result<LabelVolume> {
    LabelVolume::from_volume(&read_volume(path)?, class_map_name)
}

fn max_abs(a: &Affine) -> f64 {
    a.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Quaternion parameters for a rotation+scale affine, or None when the
/// linear block is not orthogonal.
fn quaternion_params(affine: &Affine) -> Option<([f64; 3], f64)> {
    let norms = affine.column_norms();
    let lin = affine.linear();
    let mut rot = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rot[i][j] = lin[i][j] / norms[j];
        }
    }
    for a in 0..3 {
        for b in (a + 1)..3 {
            let dot: f64 = (0..3).map(|i| rot[i][a] * rot[i][b]).sum();
            if dot.abs() > 1e-6 {
                return None;
            }
        }
    }
    let det = Affine::from_parts(rot, [0.0; 3]).det3();
    let qfac = if det < 0.0 {
        for row in rot.iter_mut() {
            row[2] = -row[2];
        }
        -1.0
    } else {
        1.0
    };
    let (r11, r12, r13) = (rot[0][0], rot[0][1], rot[0][2]);
    let (r21, r22, r23) = (rot[1][0], rot[1][1], rot[1][2]);
    let (r31, r32, r33) = (rot[2][0], rot[2][1], rot[2][2]);
    let trace = r11 + r22 + r33 + 1.0;
    let (a, mut b, mut c, mut d);
    if trace > 0.5 {
        a = 0.5 * trace.sqrt();
        b = 0.25 * (r32 - r23) / a;
        c = 0.25 * (r13 - r31) / a;
        d = 0.25 * (r21 - r12) / a;
    } else {
        let xd = 1.0 + r11 - (r22 + r33);
        let yd = 1.0 + r22 - (r11 + r33);
        let zd = 1.0 + r33 - (r11 + r22);
        if xd > 1.0 {
            b = 0.5 * xd.sqrt();
            c = 0.25 * (r12 + r21) / b;
            d = 0.25 * (r13 + r31) / b;
            a = 0.25 * (r32 - r23) / b;
        } else if yd > 1.0 {
            c = 0.5 * yd.sqrt();
            b = 0.25 * (r12 + r21) / c;
            d = 0.25 * (r23 + r32) / c;
            a = 0.25 * (r13 - r31) / c;
        } else {
            d = 0.5 * zd.sqrt();
            b = 0.25 * (r13 + r31) / d;
            c = 0.25 * (r23 + r32) / d;
            a = 0.25 * (r21 - r12) / d;
        }
        if a < 0.0 {
            b = -b;
            c = -c;
            d = -d;
        }
    }
    Some(([b, c, d], qfac))
}

fn put_i16(h: &mut [u8], off: usize, v: i16) {
    h[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_i32(h: &mut [u8], off: usize, v: i32) {
    h[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(h: &mut [u8], off: usize, v: f64) {
    h[off..off + 4].copy_from_slice(&(v as f32).to_le_bytes());
}

/// Encode a volume as NIfTI-1 bytes (uncompressed).
pub fn encode_volume(vol: &VolumeGrid) -> Result<Vec<u8>> {
    if vol.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "volume contains non-finite voxels".into(),
        ));
    }
    let shape = vol.shape();
    for &d in &shape {
        if d == 0 || d > i16::MAX as usize {
            return Err(Error::InvalidParameter(format!("cannot store dimension {d}")));
        }
    }
    let dtype = Datatype::narrowest_for(&vol.data);

    let ext_text = {
        let nums: Vec<String> = vol.affine.to_row_major().iter().map(|v| format!("{v:e}")).collect();
        format!("{AFFINE_EXT_TAG} {}", nums.join(" "))
    };
    let ext_len = (8 + ext_text.len()).div_ceil(16) * 16;
    let vox_offset = HEADER_SIZE + 4 + ext_len;

    let mut h = vec![0u8; HEADER_SIZE];
    put_i32(&mut h, 0, HEADER_SIZE as i32);
    h[38] = b'r';
    put_i16(&mut h, 40, 3);
    for (d, &n) in shape.iter().enumerate() {
        put_i16(&mut h, 42 + 2 * d, n as i16);
    }
    for d in 3..7 {
        put_i16(&mut h, 42 + 2 * d, 1);
    }
    put_i16(&mut h, 70, dtype.code());
    put_i16(&mut h, 72, (dtype.size() * 8) as i16);
    let q = quaternion_params(&vol.affine);
    put_f32(&mut h, 76, q.map_or(1.0, |(_, qfac)| qfac));
    for (d, &s) in vol.spacing.iter().enumerate() {
        put_f32(&mut h, 80 + 4 * d, s);
    }
    for d in 3..7 {
        put_f32(&mut h, 80 + 4 * d, 1.0);
    }
    put_f32(&mut h, 108, vox_offset as f64);
    put_f32(&mut h, 112, 1.0);
    put_f32(&mut h, 116, 0.0);
    h[123] = 2; // xyzt_units: mm
    let descrip = b"aarchive";
    h[148..148 + descrip.len()].copy_from_slice(descrip);
    let t = vol.affine.translation();
    if let Some((bcd, _)) = q {
        put_i16(&mut h, 252, 1);
        for (i, v) in bcd.iter().enumerate() {
            put_f32(&mut h, 256 + 4 * i, *v);
        }
        for (i, v) in t.iter().enumerate() {
            put_f32(&mut h, 268 + 4 * i, *v);
        }
    }
    put_i16(&mut h, 254, 1);
    for (row, base) in [280usize, 296, 312].iter().enumerate() {
        for c in 0..4 {
            put_f32(&mut h, base + 4 * c, vol.affine.0[row][c]);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");

    let mut out = h;
    out.extend_from_slice(&[1, 0, 0, 0]);
    out.extend_from_slice(&(ext_len as i32).to_le_bytes());
    out.extend_from_slice(&ECODE_COMMENT.to_le_bytes());
    out.extend_from_slice(ext_text.as_bytes());
    out.resize(vox_offset, 0);

    out.reserve(vol.data.len() * dtype.size());
    // NIfTI stores the first axis fastest.
    for v in vol.data.t().iter() {
        dtype.encode(*v, &mut out);
    }
    Ok(out)
}

/// Write a volume; a path ending in `.gz` is gzip-compressed.
pub fn write_volume(vol: &VolumeGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_volume(vol)?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    if gz {
        let mut enc = GzEncoder::new(w, Compression::new(6));
        enc.write_all(&bytes)?;
        enc.finish()?.flush()?;
    } else {
        w.write_all(&bytes)?;
        w.flush()?;
    }
    Ok(())
}

pub fn write_label_volume(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    write_volume(&labels.to_volume(), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn ramp(shape: (usize, usize, usize)) -> Array3<f64> {
        Array3::from_shape_fn(shape, |(i, j, k)| (i * 100 + j * 10 + k) as f64 - 50.0)
    }

    #[test]
    fn identity_4cube() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.nii");
        let vol = VolumeGrid::new(ramp((4, 4, 4)), Affine::identity()).unwrap();
        write_volume(&vol, &p).unwrap();
        let back = read_volume(&p).unwrap();
        assert_eq!(back.shape(), [4, 4, 4]);
        assert_eq!(back.spacing, [1.0, 1.0, 1.0]);
        assert_eq!(back.data, vol.data);
    }

    #[test]
    fn diag_spacing_from_affine() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.nii");
        let vol = VolumeGrid::new(ramp((3, 2, 2)), Affine::from_diag([2.0, 2.0, 5.0])).unwrap();
        write_volume(&vol, &p).unwrap();
        assert_eq!(read_volume(&p).unwrap().spacing, [2.0, 2.0, 5.0]);
    }

    #[test]
    fn gzip_matches_plain() {
        let dir = tempdir().unwrap();
        let vol = VolumeGrid::new(ramp((5, 3, 2)), Affine::pls([0.8, 0.8, 2.5])).unwrap();
        write_volume(&vol, dir.path().join("a.nii")).unwrap();
        write_volume(&vol, dir.path().join("a.nii.gz")).unwrap();
        let a = read_volume(dir.path().join("a.nii")).unwrap();
        let b = read_volume(dir.path().join("a.nii.gz")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn float_data_round_trips() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("f.nii.gz");
        let data = Array3::from_shape_fn((3, 3, 3), |(i, j, k)| (i as f64).sin() + j as f64 * 0.1 + k as f64 / 3.0);
        let vol = VolumeGrid::new(data, Affine::identity()).unwrap();
        write_volume(&vol, &p).unwrap();
        assert_eq!(read_volume(&p).unwrap().data, vol.data);
    }

    #[test]
    fn all_zero_volume() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("z.nii");
        let vol = VolumeGrid::new(Array3::zeros((2, 3, 4)), Affine::identity()).unwrap();
        write_volume(&vol, &p).unwrap();
        assert_eq!(read_volume(&p).unwrap().data, vol.data);
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            read_volume("/nonexistent/definitely/missing.nii"),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn malformed_header() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.nii");
        fs::write(&p, vec![7u8; 400]).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::MalformedHeader(_))));
        fs::write(&p, vec![7u8; 20]).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn unsupported_datatype() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.nii");
        let vol = VolumeGrid::new(ramp((2, 2, 2)), Affine::identity()).unwrap();
        let mut bytes = encode_volume(&vol).unwrap();
        bytes[70..72].copy_from_slice(&32i16.to_le_bytes()); // complex64
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::UnsupportedDatatype(32))));
    }

    #[test]
    fn scale_slope_applied() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.nii");
        let vol = VolumeGrid::new(ramp((2, 2, 2)), Affine::identity()).unwrap();
        let mut bytes = encode_volume(&vol).unwrap();
        bytes[112..116].copy_from_slice(&2.0f32.to_le_bytes());
        bytes[116..120].copy_from_slice(&(-1024.0f32).to_le_bytes());
        fs::write(&p, bytes).unwrap();
        let back = read_volume(&p).unwrap();
        assert_eq!(back.data, vol.data.mapv(|v| v * 2.0 - 1024.0));
    }

    #[test]
    fn qform_only_file() {
        // Strip sform and the exact-affine extension, forcing the quaternion path.
        let dir = tempdir().unwrap();
        let p = dir.path().join("q.nii");
        let (s, c) = (0.6f64, 0.8f64);
        let aff = Affine::from_parts(
            [[c * 2.0, -s * 2.0, 0.0], [s * 2.0, c * 2.0, 0.0], [0.0, 0.0, -3.0]],
            [10.0, -20.0, 30.0],
        );
        let vol = VolumeGrid::new(ramp((2, 2, 2)), aff).unwrap();
        let mut bytes = encode_volume(&vol).unwrap();
        bytes[254..256].copy_from_slice(&0i16.to_le_bytes());
        bytes[HEADER_SIZE] = 0;
        fs::write(&p, bytes).unwrap();
        let back = read_volume(&p).unwrap();
        assert!(back.affine.max_abs_diff(&aff) < 1e-5, "{:?}", back.affine);
    }
}
