use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array3;
use rmpv::Value;

use super::sparse::SparseMask;
use crate::error::{Error, Result};
use crate::features::FeatureMapStack;
use crate::image_io::Affine;
use crate::registry::{AnatomyGraph, Edge, EdgeKind, GraphData};

pub const SCHEMA_VERSION: u64 = 1;

/// Original image stored next to the masks.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveImage {
    pub data: Array3<f64>,
    pub affine: Affine,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArchiveMeta {
    pub data_id: String,
    /// class maps the masks were taken from, e.g. `total_v2`
    pub class_maps: Vec<String>,
    pub ct_bed_removed: bool,
}

/// Masks of one image, the anatomy graph they belong to and optional extras.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveRecord {
    pub shape: [usize; 3],
    pub masks: BTreeMap<String, SparseMask>,
    pub graph: GraphData,
    pub image: Option<ArchiveImage>,
    pub meta: ArchiveMeta,
    pub features: Option<FeatureMapStack>,
}

/// Masks at or above one third density are cheaper as a bitmap than as
/// three u32 per voxel.
pub fn uses_dense_fallback(mask: &SparseMask) -> bool {
    let total: usize = mask.shape.iter().product();
    3 * mask.count() >= total
}

impl ArchiveRecord {
    pub fn validate(&self) -> Result<()> {
        let graph = AnatomyGraph::from_data(&self.graph)?;
        for (name, m) in &self.masks {
            if m.shape != self.shape {
                return Err(Error::ShapeMismatch {
                    expected: self.shape.to_vec(),
                    found: m.shape.to_vec(),
                });
            }
            if !graph.contains(name) || !graph.children_of(name).is_empty() {
                return Err(Error::CorruptArchive(format!("mask '{name}' is not a leaf of the graph")));
            }
            m.validate()?;
        }
        if let Some(img) = &self.image {
            if img.data.shape() != self.shape {
                return Err(Error::ShapeMismatch {
                    expected: self.shape.to_vec(),
                    found: img.data.shape().to_vec(),
                });
            }
        }
        if let Some(f) = &self.features {
            if f.shape != self.shape {
                return Err(Error::ShapeMismatch {
                    expected: self.shape.to_vec(),
                    found: f.shape.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Names of masks that are stored as bitmaps.
    pub fn dense_masks(&self) -> Vec<&str> {
        self.masks
            .iter()
            .filter(|(_, m)| uses_dense_fallback(m))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut top = vec![
            kv("schema_version", Value::from(SCHEMA_VERSION)),
            kv("shape", shape_value(self.shape)),
            kv(
                "masks",
                Value::Map(
                    self.masks
                        .iter()
                        .map(|(n, m)| (Value::from(n.as_str()), mask_value(m)))
                        .collect(),
                ),
            ),
            kv("graph", graph_value(&self.graph)),
        ];
        if let Some(img) = &self.image {
            top.push(kv("image", image_value(img)));
        }
        top.push(kv(
            "meta",
            Value::Map(vec![
                kv("data_id", Value::from(self.meta.data_id.as_str())),
                kv(
                    "class_maps",
                    Value::Array(self.meta.class_maps.iter().map(|s| Value::from(s.as_str())).collect()),
                ),
                kv("ct_bed_removed", Value::Boolean(self.meta.ct_bed_removed)),
                kv(
                    "dense_masks",
                    Value::Array(self.dense_masks().into_iter().map(Value::from).collect()),
                ),
            ]),
        ));
        if let Some(f) = &self.features {
            top.push(kv("features", features_value(f)));
        }
        let mut buf = Vec::new();
        rmpv::encode::write_value(&mut buf, &Value::Map(top))
            .map_err(|e| Error::CorruptArchive(format!("encoding failed: {e}")))?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = bytes;
        let root = rmpv::decode::read_value(&mut rd).map_err(|e| corrupt(format!("not a MessagePack document: {e}")))?;
        if !rd.is_empty() {
            return Err(corrupt("trailing bytes after archive"));
        }
        let top = as_map(&root, "root")?;
        let version = get(top, "schema_version")?
            .as_u64()
            .ok_or_else(|| corrupt("schema_version is not an integer"))?;
        if version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let shape = read_shape(get(top, "shape")?)?;
        let mut masks = BTreeMap::new();
        for (k, v) in as_map(get(top, "masks")?, "masks")? {
            let name = as_str(k, "mask name")?.to_string();
            masks.insert(name, read_mask(v, shape)?);
        }
        let graph = read_graph(get(top, "graph")?)?;
        let image = match find(top, "image") {
            Some(v) => Some(read_image(v, shape)?),
            None => None,
        };
        let meta_map = as_map(get(top, "meta")?, "meta")?;
        let meta = ArchiveMeta {
            data_id: as_str(get(meta_map, "data_id")?, "data_id")?.to_string(),
            class_maps: as_array(get(meta_map, "class_maps")?, "class_maps")?
                .iter()
                .map(|v| as_str(v, "class map").map(str::to_string))
                .collect::<Result<_>>()?,
            ct_bed_removed: get(meta_map, "ct_bed_removed")?
                .as_bool()
                .ok_or_else(|| corrupt("ct_bed_removed is not a bool"))?,
        };
        let features = match find(top, "features") {
            Some(v) => Some(read_features(v)?),
            None => None,
        };
        let rec = ArchiveRecord {
            shape,
            masks,
            graph,
            image,
            meta,
            features,
        };
        rec.validate()?;
        Ok(rec)
    }
}

pub fn pack_archive(rec: &ArchiveRecord, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, rec.to_bytes()?)?;
    Ok(())
}

pub fn unpack_archive(path: impl AsRef<Path>) -> Result<ArchiveRecord> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    ArchiveRecord::from_bytes(&fs::read(path)?)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptArchive(msg.into())
}

fn kv(key: &str, value: Value) -> (Value, Value) {
    (Value::from(key), value)
}

fn shape_value(shape: [usize; 3]) -> Value {
    Value::Array(shape.iter().map(|&s| Value::from(s as u64)).collect())
}

fn coords_blob(coords: &[[u32; 3]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(coords.len() * 12);
    for c in coords {
        for v in c {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn bitmap_blob(m: &SparseMask) -> Vec<u8> {
    let total: usize = m.shape.iter().product();
    let mut out = vec![0u8; total.div_ceil(8)];
    for i in m.flat_indices() {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

fn i16_blob(values: &[i16]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn f64_blob(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values.into_iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn mask_value(m: &SparseMask) -> Value {
    let mut fields = Vec::new();
    if uses_dense_fallback(m) {
        fields.push(kv("encoding", Value::from("bitmap")));
        fields.push(kv("count", Value::from(m.count() as u64)));
        fields.push(kv("bits", Value::Binary(bitmap_blob(m))));
    } else {
        fields.push(kv("encoding", Value::from("coo")));
        fields.push(kv("count", Value::from(m.count() as u64)));
        fields.push(kv("coords", Value::Binary(coords_blob(&m.coords))));
    }
    if let (Some(values), Some(fill)) = (&m.values, m.fill_value) {
        fields.push(kv("values", Value::Binary(i16_blob(values))));
        fields.push(kv("fill_value", Value::from(i64::from(fill))));
    }
    Value::Map(fields)
}

fn graph_value(g: &GraphData) -> Value {
    let edge = |e: &Edge| {
        let mut f = vec![
            kv("source", Value::from(e.source.as_str())),
            kv("target", Value::from(e.target.as_str())),
            kv(
                "kind",
                Value::from(match e.kind {
                    EdgeKind::Hierarchy => "hierarchy",
                    EdgeKind::Group => "group",
                }),
            ),
        ];
        if let Some(t) = &e.tag {
            f.push(kv("tag", Value::from(t.as_str())));
        }
        Value::Map(f)
    };
    Value::Map(vec![
        kv("nodes", Value::Array(g.nodes.iter().map(|n| Value::from(n.as_str())).collect())),
        kv("edges", Value::Array(g.edges.iter().map(edge).collect())),
    ])
}

fn fits_i16(data: &Array3<f64>) -> bool {
    data.iter().all(|&v| {
        v.fract() == 0.0 && v >= i16::MIN as f64 && v <= i16::MAX as f64 && !(v == 0.0 && v.is_sign_negative())
    })
}

fn image_value(img: &ArchiveImage) -> Value {
    let (dtype, data) = if fits_i16(&img.data) {
        ("i16", img.data.iter().flat_map(|&v| (v as i16).to_le_bytes()).collect())
    } else {
        ("f64", f64_blob(img.data.iter().copied()))
    };
    Value::Map(vec![
        kv("dtype", Value::from(dtype)),
        kv("data", Value::Binary(data)),
        kv(
            "affine",
            Value::Array(img.affine.to_row_major().iter().map(|&v| Value::F64(v)).collect()),
        ),
    ])
}

fn features_value(f: &FeatureMapStack) -> Value {
    let conditions = f
        .conditions
        .iter()
        .map(|(c, maps)| {
            let inner = maps
                .iter()
                .map(|(name, v)| (Value::from(name.as_str()), Value::Binary(f64_blob(v.iter().copied()))))
                .collect();
            (Value::from(c.as_str()), Value::Map(inner))
        })
        .collect();
    Value::Map(vec![
        kv("shape", shape_value(f.shape)),
        kv("coords", Value::Binary(coords_blob(&f.coords))),
        kv("conditions", Value::Map(conditions)),
    ])
}

fn find<'a>(map: &'a [(Value, Value)], key: &str) -> Option<&'a Value> {
    map.iter().find(|(k, _)| k.as_str() == Some(key)).map(|(_, v)| v)
}

fn get<'a>(map: &'a [(Value, Value)], key: &str) -> Result<&'a Value> {
    find(map, key).ok_or_else(|| corrupt(format!("missing key '{key}'")))
}

fn as_map<'a>(v: &'a Value, what: &str) -> Result<&'a [(Value, Value)]> {
    v.as_map().map(Vec::as_slice).ok_or_else(|| corrupt(format!("{what} is not a map")))
}

fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a [Value]> {
    v.as_array().map(Vec::as_slice).ok_or_else(|| corrupt(format!("{what} is not an array")))
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| corrupt(format!("{what} is not a string")))
}

fn as_bin<'a>(v: &'a Value, what: &str) -> Result<&'a [u8]> {
    v.as_slice().ok_or_else(|| corrupt(format!("{what} is not binary")))
}

fn read_shape(v: &Value) -> Result<[usize; 3]> {
    let a = as_array(v, "shape")?;
    if a.len() != 3 {
        return Err(corrupt("shape must have three entries"));
    }
    let mut s = [0; 3];
    for (d, x) in a.iter().enumerate() {
        s[d] = x.as_u64().ok_or_else(|| corrupt("shape entry is not an integer"))? as usize;
    }
    Ok(s)
}

fn read_coords(blob: &[u8]) -> Result<Vec<[u32; 3]>> {
    if blob.len() % 12 != 0 {
        return Err(corrupt("coordinate blob length is not a multiple of 12"));
    }
    Ok(blob
        .chunks_exact(12)
        .map(|c| {
            let u = |o: usize| u32::from_le_bytes([c[o], c[o + 1], c[o + 2], c[o + 3]]);
            [u(0), u(4), u(8)]
        })
        .collect())
}

fn read_f64s(blob: &[u8], what: &str) -> Result<Vec<f64>> {
    if blob.len() % 8 != 0 {
        return Err(corrupt(format!("{what} blob length is not a multiple of 8")));
    }
    Ok(blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn read_mask(v: &Value, shape: [usize; 3]) -> Result<SparseMask> {
    let m = as_map(v, "mask")?;
    let count = get(m, "count")?
        .as_u64()
        .ok_or_else(|| corrupt("mask count is not an integer"))? as usize;
    let coords = match as_str(get(m, "encoding")?, "encoding")? {
        "coo" => read_coords(as_bin(get(m, "coords")?, "coords")?)?,
        "bitmap" => {
            let bits = as_bin(get(m, "bits")?, "bits")?;
            let total: usize = shape.iter().product();
            if bits.len() != total.div_ceil(8) {
                return Err(corrupt("bitmap length does not match shape"));
            }
            let [_, n, k] = shape;
            (0..total)
                .filter(|i| bits[i / 8] >> (i % 8) & 1 == 1)
                .map(|i| [(i / (n * k)) as u32, (i / k % n) as u32, (i % k) as u32])
                .collect()
        }
        other => return Err(corrupt(format!("unknown mask encoding '{other}'"))),
    };
    if coords.len() != count {
        return Err(corrupt(format!("mask holds {} voxels, header says {count}", coords.len())));
    }
    let values = match find(m, "values") {
        Some(v) => {
            let blob = as_bin(v, "values")?;
            if blob.len() % 2 != 0 {
                return Err(corrupt("value blob length is odd"));
            }
            Some(blob.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect())
        }
        None => None,
    };
    let fill_value = match find(m, "fill_value") {
        Some(v) => Some(
            v.as_i64()
                .and_then(|x| i16::try_from(x).ok())
                .ok_or_else(|| corrupt("fill_value is not a 16-bit integer"))?,
        ),
        None => None,
    };
    Ok(SparseMask {
        coords,
        shape,
        values,
        fill_value,
    })
}

fn read_graph(v: &Value) -> Result<GraphData> {
    let g = as_map(v, "graph")?;
    let nodes = as_array(get(g, "nodes")?, "nodes")?
        .iter()
        .map(|n| as_str(n, "node").map(str::to_string))
        .collect::<Result<_>>()?;
    let edges = as_array(get(g, "edges")?, "edges")?
        .iter()
        .map(|e| {
            let e = as_map(e, "edge")?;
            let kind = match as_str(get(e, "kind")?, "edge kind")? {
                "hierarchy" => EdgeKind::Hierarchy,
                "group" => EdgeKind::Group,
                other => return Err(corrupt(format!("unknown edge kind '{other}'"))),
            };
            Ok(Edge {
                source: as_str(get(e, "source")?, "edge source")?.to_string(),
                target: as_str(get(e, "target")?, "edge target")?.to_string(),
                kind,
                tag: find(e, "tag").map(|t| as_str(t, "edge tag").map(str::to_string)).transpose()?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GraphData { nodes, edges })
}

fn read_image(v: &Value, shape: [usize; 3]) -> Result<ArchiveImage> {
    let m = as_map(v, "image")?;
    let blob = as_bin(get(m, "data")?, "image data")?;
    let total: usize = shape.iter().product();
    let data: Vec<f64> = match as_str(get(m, "dtype")?, "dtype")? {
        "i16" => {
            if blob.len() != total * 2 {
                return Err(corrupt("image blob size does not match shape"));
            }
            blob.chunks_exact(2)
                .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])))
                .collect()
        }
        "f64" => {
            if blob.len() != total * 8 {
                return Err(corrupt("image blob size does not match shape"));
            }
            read_f64s(blob, "image")?
        }
        other => return Err(corrupt(format!("unknown image dtype '{other}'"))),
    };
    let aff = as_array(get(m, "affine")?, "affine")?;
    if aff.len() != 16 {
        return Err(corrupt("affine must have 16 entries"));
    }
    let mut flat = [0.0; 16];
    for (i, x) in aff.iter().enumerate() {
        flat[i] = x.as_f64().ok_or_else(|| corrupt("affine entry is not a float"))?;
    }
    Ok(ArchiveImage {
        data: Array3::from_shape_vec(shape, data).map_err(|e| corrupt(e.to_string()))?,
        affine: Affine::from_row_major(&flat).ok_or_else(|| corrupt("invalid affine"))?,
    })
}

fn read_features(v: &Value) -> Result<FeatureMapStack> {
    let m = as_map(v, "features")?;
    let mut stack = FeatureMapStack::new(
        read_shape(get(m, "shape")?)?,
        read_coords(as_bin(get(m, "coords")?, "feature coords")?)?,
    );
    for (c, maps) in as_map(get(m, "conditions")?, "conditions")? {
        let cond = as_str(c, "condition id")?;
        for (f, blob) in as_map(maps, "condition")? {
            let name = as_str(f, "feature name")?;
            let values = read_f64s(as_bin(blob, "feature values")?, "feature")?;
            stack.insert(cond, name, values).map_err(|_| corrupt("feature length differs from voxel count"))?;
        }
    }
    Ok(stack)
}
