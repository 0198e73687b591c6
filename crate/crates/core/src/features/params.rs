use std::path::Path;

use serde_yaml::{Mapping, Value};

use super::voxel::FirstOrderFeature;
use crate::error::{Error, Result};

/// Settings for voxel-based first-order extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionParams {
    pub bin_width: f64,
    pub kernel_radius: usize,
    pub masked_kernel: bool,
    /// value of voxels outside the region in dense feature maps
    pub init_value: f64,
    pub voxel_batch: usize,
    pub label: u16,
    pub features: Vec<FirstOrderFeature>,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        ExtractionParams {
            bin_width: 25.0,
            kernel_radius: 2,
            masked_kernel: true,
            init_value: 0.0,
            voxel_batch: 10000,
            label: 1,
            features: FirstOrderFeature::ALL.to_vec(),
        }
    }
}

fn section<'a>(root: &'a Mapping, key: &str) -> Result<Option<&'a Mapping>> {
    match root.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Mapping(m)) => Ok(Some(m)),
        Some(_) => Err(Error::config(key, "expected a mapping")),
    }
}

fn keys(m: &Mapping, path: &str) -> Result<Vec<String>> {
    m.keys()
        .map(|k| {
            k.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::config(path, "non-string key"))
        })
        .collect()
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::config(path, "expected a number"))
}

fn integer(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| Error::config(path, "expected a non-negative integer"))
}

fn boolean(v: &Value, path: &str) -> Result<bool> {
    v.as_bool().ok_or_else(|| Error::config(path, "expected a boolean"))
}

impl ExtractionParams {
    pub fn from_yaml(text: &str) -> Result<Self> {
        let root: Value = serde_yaml::from_str(text)?;
        let root = match root {
            Value::Mapping(m) => m,
            Value::Null => Mapping::new(),
            _ => return Err(Error::config("", "expected a mapping at the top level")),
        };
        let mut p = ExtractionParams::default();
        for k in keys(&root, "")? {
            if !["imageType", "featureClass", "setting", "voxelSetting"].contains(&k.as_str()) {
                return Err(Error::config(k.clone(), "unsupported section"));
            }
        }
        if let Some(m) = section(&root, "imageType")? {
            for k in keys(m, "imageType")? {
                if k != "Original" {
                    return Err(Error::config(format!("imageType.{k}"), "only the Original image type is supported"));
                }
            }
        }
        if let Some(m) = section(&root, "featureClass")? {
            for k in keys(m, "featureClass")? {
                if k != "firstorder" {
                    return Err(Error::config(
                        format!("featureClass.{k}"),
                        "only first-order features are supported",
                    ));
                }
            }
            match m.get("firstorder") {
                None | Some(Value::Null) => {}
                Some(Value::Sequence(names)) if names.is_empty() => {}
                Some(Value::Sequence(names)) => {
                    let mut feats = Vec::new();
                    for n in names {
                        let n = n
                            .as_str()
                            .ok_or_else(|| Error::config("featureClass.firstorder", "expected feature names"))?;
                        let f = FirstOrderFeature::from_name(n).ok_or_else(|| {
                            Error::config(format!("featureClass.firstorder.{n}"), "unknown first-order feature")
                        })?;
                        if !feats.contains(&f) {
                            feats.push(f);
                        }
                    }
                    p.features = feats;
                }
                Some(_) => return Err(Error::config("featureClass.firstorder", "expected a list or null")),
            }
        }
        if let Some(m) = section(&root, "setting")? {
            for k in keys(m, "setting")? {
                let path = format!("setting.{k}");
                let v = &m[k.as_str()];
                match k.as_str() {
                    "binWidth" => p.bin_width = number(v, &path)?,
                    "force2D" => {
                        if boolean(v, &path)? {
                            return Err(Error::config(path, "2D extraction is not supported"));
                        }
                    }
                    "label" => {
                        p.label = u16::try_from(integer(v, &path)?)
                            .map_err(|_| Error::config(path, "label out of range"))?
                    }
                    _ => return Err(Error::config(path, "unsupported setting")),
                }
            }
        }
        if let Some(m) = section(&root, "voxelSetting")? {
            for k in keys(m, "voxelSetting")? {
                let path = format!("voxelSetting.{k}");
                let v = &m[k.as_str()];
                match k.as_str() {
                    "kernelRadius" => p.kernel_radius = integer(v, &path)? as usize,
                    "maskedKernel" => p.masked_kernel = boolean(v, &path)?,
                    "initValue" => {
                        let x = number(v, &path)?;
                        p.init_value = if x.is_nan() {
                            log::warn!("voxelSetting.initValue is NaN; using 0");
                            0.0
                        } else {
                            x
                        };
                    }
                    "voxelBatch" => p.voxel_batch = integer(v, &path)? as usize,
                    _ => return Err(Error::config(path, "unsupported voxel setting")),
                }
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn from_yaml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
        Self::from_yaml(&text).map_err(|e| match e {
            Error::Config { path: p, message } => Error::config(format!("{}:{p}", path.display()), message),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0) || !self.bin_width.is_finite() {
            return Err(Error::config("setting.binWidth", "must be positive"));
        }
        if self.kernel_radius == 0 {
            return Err(Error::config("voxelSetting.kernelRadius", "must be at least 1"));
        }
        if self.voxel_batch == 0 {
            return Err(Error::config("voxelSetting.voxelBatch", "must be at least 1"));
        }
        if self.features.is_empty() {
            return Err(Error::config("featureClass.firstorder", "no features selected"));
        }
        Ok(())
    }
}
