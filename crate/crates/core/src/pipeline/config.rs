use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::{ConditionParam, PlaneMode, TargetEvaConfig};
use crate::image_io::{AxCodes, WORKING_ORIENTATION};
use crate::standardizer::ProsthesisParams;
use crate::stats::AutoTestOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// label maps are `<id><label_infix><task>.nii[.gz]`
    #[serde(default = "default_infix")]
    pub label_infix: String,
    /// store the CT grid in every archive
    #[serde(default)]
    pub keep_image: bool,
}

fn default_infix() -> String {
    "_seg_".to_string()
}

/// Voxel-based feature extraction on one structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelFeatureConfig {
    /// extraction params YAML; defaults apply when absent
    #[serde(default)]
    pub params: Option<PathBuf>,
    /// label map holding the structure
    pub task: String,
    /// structure or group selector
    pub anatomy: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// `kernelRadius` or `binWidth` (snake case accepted)
    pub target_param: String,
    pub target_range: Vec<f64>,
    #[serde(default = "default_components")]
    pub n_components: usize,
    #[serde(default)]
    pub do_ttest: bool,
    #[serde(default)]
    pub plot_result: bool,
    /// per-instance CSV name, written as `<id>_<save_stats_path>`
    #[serde(default = "default_stats_path")]
    pub save_stats_path: String,
    #[serde(default)]
    pub test_options: AutoTestOptions,
}

fn default_components() -> usize {
    2
}

fn default_stats_path() -> String {
    "robustness.csv".to_string()
}

impl RobustnessConfig {
    pub fn condition_param(&self) -> Result<ConditionParam> {
        match self.target_param.as_str() {
            "kernelRadius" | "kernel_radius" => Ok(ConditionParam::KernelRadius),
            "binWidth" | "bin_width" => Ok(ConditionParam::BinWidth),
            other => Err(Error::config(
                "robustness.target_param",
                format!("'{other}' is not one of kernelRadius, binWidth"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlImageConfig {
    /// coronal MIP with bounds and prosthesis overlay
    pub bounds: bool,
    /// trunk, arm and leg outlines
    pub body: bool,
}

impl Default for ControlImageConfig {
    fn default() -> Self {
        ControlImageConfig { bounds: true, body: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PlaneModeName {
    Midpoint,
    MaxCrossSection,
}

/// Parsed and validated workflow configuration.
///
/// Relative paths are resolved against the directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowConfig {
    pub io: IoConfig,
    #[serde(default = "default_orientation")]
    pub orientation: String,
    #[serde(default = "default_version")]
    pub segmentation_version: u8,
    /// border margin (voxels per axis) for crop detection
    #[serde(default)]
    pub crop_addon: [usize; 3],
    pub target_eva_config: Value,
    #[serde(default)]
    pub prosthesis: ProsthesisParams,
    #[serde(default)]
    central_plane: Option<PlaneModeName>,
    #[serde(default)]
    pub voxel_features: Option<VoxelFeatureConfig>,
    #[serde(default)]
    pub robustness: Option<RobustnessConfig>,
    #[serde(default)]
    pub control_images: ControlImageConfig,
    /// worker threads; defaults to the number of logical cores
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub tasks: TargetEvaConfig,
}

fn default_orientation() -> String {
    "PLS".to_string()
}

fn default_version() -> u8 {
    2
}

impl WorkflowConfig {
    /// Parse from JSON text; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: WorkflowConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "workflowConfig".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.tasks = TargetEvaConfig::from_value(&cfg.target_eva_config)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.io.input_dir);
        resolve(&mut cfg.io.output_dir);
        if let Some(p) = cfg.voxel_features.as_mut().and_then(|v| v.params.as_mut()) {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plane_mode(&self) -> PlaneMode {
        match self.central_plane {
            Some(PlaneModeName::MaxCrossSection) => PlaneMode::MaxCrossSection,
            _ => PlaneMode::Midpoint,
        }
    }

    fn validate(&self) -> Result<()> {
        let codes: AxCodes = self
            .orientation
            .parse()
            .map_err(|e: Error| Error::config("orientation", e.to_string()))?;
        if codes != WORKING_ORIENTATION {
            return Err(Error::config(
                "orientation",
                format!("processing runs in {WORKING_ORIENTATION}; '{}' is not supported", self.orientation),
            ));
        }
        if !(1..=2).contains(&self.segmentation_version) {
            return Err(Error::config("segmentation_version", "must be 1 or 2"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.io.label_infix.is_empty() {
            return Err(Error::config("io.label_infix", "must not be empty"));
        }
        if let Some(r) = &self.robustness {
            r.condition_param()?;
            if r.target_range.is_empty() {
                return Err(Error::config("robustness.target_range", "must not be empty"));
            }
            if r.target_range.len() < 2 {
                return Err(Error::config("robustness.target_range", "needs at least two values"));
            }
            if r.n_components == 0 || r.n_components > r.target_range.len() {
                return Err(Error::config(
                    "robustness.n_components",
                    format!("must lie in 1..={}", r.target_range.len()),
                ));
            }
            if self.voxel_features.is_none() {
                return Err(Error::config("robustness", "requires a voxel_features section"));
            }
            if r.save_stats_path.contains('/') || r.save_stats_path.is_empty() {
                return Err(Error::config("robustness.save_stats_path", "must be a plain file name"));
            }
        }
        Ok(())
    }
}

/// Read and validate a workflow config file (strict JSON).
pub fn load_workflow_config(path: impl AsRef<Path>) -> Result<WorkflowConfig> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    WorkflowConfig::from_json(&text, base)
}
