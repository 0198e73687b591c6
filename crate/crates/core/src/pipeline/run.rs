use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array3, Zip};
use rayon::prelude::*;
use serde::Serialize;

use super::config::WorkflowConfig;
use super::manifest::{export_dataset_tags, export_manifest, InstanceStatus, ManifestEntry, RunManifest};
use crate::archive::{pack_archive, ArchiveRecord, ARCHIVE_EXTENSION};
use crate::error::{Error, Result};
use crate::features::{
    body_component_analysis, build_condition_stack, central_plane, extract_voxel_features, AnalysisRegion,
    ComponentMetrics, ExtractionParams, FeatureMapStack, Reference, DEFAULT_REFERENCE_TASK,
};
use crate::image_io::{read_label_volume, read_volume, reorient_volume, LabelVolume, VolumeGrid, WORKING_ORIENTATION};
use crate::registry::{load_class_map, ClassMap, Registry};
use crate::standardizer::{
    self as std_, anatomy_mask, define_volume_bounds_by_anatomies, detect_hip_prosthesis, detect_mask_cropping,
    resolve_reference_anatomy, separate_arms_and_legs, trunk_crop_axis, ArmLegSplit, Bound, DatasetTag,
    ProsthesisReport, VolumeBounds, BODY_TRUNK_LABEL,
};
use crate::stats::{eval_feature_robustness, write_robustness_csv, RobustnessMode, RobustnessOptions};
use crate::viz::{choose_control_plane, render_boxplot, render_control_image, ControlOverlays, Plane};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_TAG_FILE: &str = "dataset_tags.json";
const BODY_TASK: &str = "body";

/// One CT volume and its label maps, keyed by task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub data_id: String,
    pub volume: PathBuf,
    pub labels: BTreeMap<String, PathBuf>,
}

fn strip_nifti_ext(name: &str) -> Option<&str> {
    name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii"))
}

/// Pair every `<id>.nii[.gz]` in `dir` with its `<id><infix><task>.nii[.gz]`
/// label maps. Sorted by id.
pub fn discover_instances(dir: &Path, infix: &str) -> Result<Vec<Instance>> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut volumes = BTreeMap::new();
    let mut labels: BTreeMap<String, BTreeMap<String, PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = strip_nifti_ext(name) else {
            continue;
        };
        match stem.split_once(infix) {
            Some((id, task)) if !id.is_empty() && !task.is_empty() => {
                labels.entry(id.to_string()).or_default().insert(task.to_string(), path.clone());
            }
            Some(_) => log::warn!("ignoring {}", path.display()),
            None => {
                if volumes.insert(stem.to_string(), path.clone()).is_some() {
                    return Err(Error::InvalidParameter(format!("volume '{stem}' present as both .nii and .nii.gz")));
                }
            }
        }
    }
    for id in labels.keys().filter(|id| !volumes.contains_key(*id)) {
        log::warn!("label maps for '{id}' have no volume, ignored");
    }
    let out: Vec<Instance> = volumes
        .into_iter()
        .map(|(id, volume)| Instance {
            labels: labels.remove(&id).unwrap_or_default(),
            data_id: id,
            volume,
        })
        .collect();
    if out.is_empty() {
        return Err(Error::InsufficientData(format!("no volumes found in {}", dir.display())));
    }
    Ok(out)
}

struct Outcome {
    data_id: String,
    status: InstanceStatus,
    tags: DatasetTag,
    artifacts: Vec<String>,
    message: Option<String>,
    timings: BTreeMap<String, u64>,
}

struct Ctx<'a> {
    cfg: &'a WorkflowConfig,
    params: Option<&'a ExtractionParams>,
    out_dir: &'a Path,
    data_id: &'a str,
    tags: DatasetTag,
    artifacts: Vec<String>,
    timings: BTreeMap<String, u64>,
    clock: Instant,
}

impl Ctx<'_> {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings
            .insert(stage.to_string(), now.duration_since(self.clock).as_millis() as u64);
        self.clock = now;
    }

    fn file(&mut self, kind: &str, ext: &str) -> PathBuf {
        let name = format!("{}_{kind}.{ext}", self.data_id);
        self.artifacts.push(name.clone());
        self.out_dir.join(name)
    }
}

#[derive(Serialize)]
struct InstanceMetrics<'a> {
    data_id: &'a str,
    region: AnalysisRegion,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<&'a VolumeBounds>,
    tasks: BTreeMap<String, BTreeMap<String, ComponentMetrics>>,
}

struct Loaded {
    vol: VolumeGrid,
    maps: BTreeMap<String, (LabelVolume, ClassMap)>,
}

impl Loaded {
    fn map(&self, task: &str) -> Result<&(LabelVolume, ClassMap)> {
        self.maps
            .get(task)
            .ok_or_else(|| Error::InvalidParameter(format!("no label map for task '{task}'")))
    }
}

fn load(inst: &Instance, version: u8) -> Result<Loaded> {
    let vol = reorient_volume(&read_volume(&inst.volume)?, WORKING_ORIENTATION)?;
    let mut maps = BTreeMap::new();
    for (task, path) in &inst.labels {
        let lv = read_label_volume(path, task.as_str())?.reorient(WORKING_ORIENTATION)?;
        if lv.shape() != vol.shape() {
            return Err(Error::ShapeMismatch {
                expected: vol.shape().to_vec(),
                found: lv.shape().to_vec(),
            });
        }
        maps.insert(task.clone(), (lv, load_class_map(task, version, true)?));
    }
    Ok(Loaded { vol, maps })
}

/// Class-map names under `selector` restricted to what the map provides.
fn selected_names(cm: &ClassMap, selector: &str, registry: &Registry) -> Result<Vec<String>> {
    let g = registry.graph().restricted_to(&cm.names());
    registry.expand_in(&g, selector)
}

/// Union of every arm bone found in any loaded label map.
fn arm_bone_mask(data: &Loaded, registry: &Registry) -> Array3<bool> {
    let mut out = Array3::from_elem(data.vol.shape(), false);
    for (lv, cm) in data.maps.values() {
        if let Ok(names) = selected_names(cm, "arm_bones", registry) {
            let m = anatomy_mask(lv, cm, &names);
            Zip::from(&mut out).and(&m).for_each(|o, m| *o |= *m);
        }
    }
    out
}

fn z_range_bounds(lower: usize, upper: usize) -> VolumeBounds {
    let b = |z: usize| Bound {
        anatomy: "volume".into(),
        z: z as i64,
    };
    VolumeBounds {
        upper: b(upper),
        lower: b(lower),
    }
}

fn skipped(ctx: Ctx, message: &str) -> Result<Outcome> {
    Ok(Outcome {
        data_id: ctx.data_id.to_string(),
        status: InstanceStatus::Skipped,
        tags: ctx.tags,
        artifacts: ctx.artifacts,
        message: Some(message.to_string()),
        timings: ctx.timings,
    })
}

fn bounds_control_image(
    ctx: &mut Ctx,
    data: &Loaded,
    bounds: Option<&VolumeBounds>,
    prosthesis: Option<&ProsthesisReport>,
    plane_z: Option<usize>,
) -> Result<()> {
    if !ctx.cfg.control_images.bounds {
        return Ok(());
    }
    let o = ControlOverlays {
        bounds: bounds.map(|b| b.planes()).transpose()?,
        prosthesis,
        bright_threshold: Some(ctx.cfg.prosthesis.bright.threshold),
        central_plane: plane_z,
        ..Default::default()
    };
    let img = render_control_image(&data.vol, Plane::Coronal, &o)?;
    let path = ctx.file("bounds", "png");
    img.write_png(&path)
}

fn process(mut ctx: Ctx, inst: &Instance) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let registry = Registry::builtin();
    let id = inst.data_id.clone();
    let data = load(inst, cfg.segmentation_version)?;
    let depth = data.vol.shape()[2];
    ctx.lap("load");

    let mut bounds = None;
    let mut plane_z = None;
    let region = match cfg.tasks.reference() {
        Some((task, Reference::Bounds { upper, lower })) => {
            let (lv, cm) = data.map(task).or_else(|_| data.map(DEFAULT_REFERENCE_TASK))?;
            let b = define_volume_bounds_by_anatomies(lv, cm, &upper, &lower, cfg.crop_addon, registry)?;
            if b.record_tags(&mut ctx.tags, &id) > 0 {
                ctx.lap("bounds");
                return skipped(ctx, "volume bounds undefined");
            }
            let (lo, hi) = b.planes()?;
            bounds = Some(b);
            AnalysisRegion::Slab { lower: lo, upper: hi }
        }
        Some((task, Reference::CentralPlane(obj))) => {
            let (lv, cm) = data.map(task).or_else(|_| data.map(DEFAULT_REFERENCE_TASK))?;
            let names = resolve_reference_anatomy(&obj, cm, registry)?;
            let mask = anatomy_mask(lv, cm, &names);
            let Some(z) = central_plane(&mask, cfg.plane_mode()) else {
                ctx.tags.add_tag_to_data(std_::REF_OBJECT_MISSING, &id, std_::SEVERITY_ERROR);
                return skipped(ctx, "reference object missing");
            };
            if detect_mask_cropping(&mask, cfg.crop_addon).cropped {
                ctx.tags.add_tag_to_data(std_::REF_OBJECT_CROPPED, &id, std_::SEVERITY_ERROR);
                return skipped(ctx, "reference object cropped");
            }
            plane_z = Some(z);
            AnalysisRegion::Plane { z }
        }
        None => AnalysisRegion::Whole,
    };
    ctx.lap("bounds");

    let exclude = cfg.tasks.exclude_prosthesis_samples();
    let prosthesis = match (&bounds, exclude) {
        (Some(b), _) => Some(detect_hip_prosthesis(&data.vol, b.planes()?.0, &cfg.prosthesis, Some(&mut ctx.tags), &id)?),
        (None, true) => Some(detect_hip_prosthesis(&data.vol, 0, &cfg.prosthesis, Some(&mut ctx.tags), &id)?),
        (None, false) => None,
    };
    ctx.lap("prosthesis");
    bounds_control_image(&mut ctx, &data, bounds.as_ref(), prosthesis.as_ref(), plane_z)?;
    if exclude && prosthesis.as_ref().is_some_and(|p| p.detected) {
        ctx.lap("control_images");
        return skipped(ctx, "prosthesis detected");
    }

    let split: Option<ArmLegSplit> = match data.maps.get(BODY_TASK) {
        Some((body, _)) => {
            let span = match (&bounds, region) {
                (Some(b), _) => b.clone(),
                (None, AnalysisRegion::Plane { z }) => z_range_bounds(z, z),
                _ => z_range_bounds(0, depth - 1),
            };
            let s = separate_arms_and_legs(body, &arm_bone_mask(&data, registry), &span, cfg.crop_addon)?;
            if !s.arms.is_empty() {
                ctx.tags.add_tag_to_data(std_::ARMS_DETECTED, &id, std_::SEVERITY_WARNING);
            }
            if s.trunk_cropped {
                ctx.tags.add_tag_to_data(std_::BODY_TRUNK_CROPPED, &id, std_::SEVERITY_WARNING);
            }
            Some(s)
        }
        None => None,
    };
    let arms = split.as_ref().filter(|s| !s.arms.is_empty()).map(|s| s.arm_mask(data.vol.shape()));
    if let (Some(s), true) = (&split, cfg.control_images.body) {
        let (body, _) = data.map(BODY_TASK)?;
        let trunk = body.mask_of(BODY_TRUNK_LABEL);
        let legs = s.leg_mask(data.vol.shape());
        let o = ControlOverlays {
            trunk: Some(&trunk),
            trunk_cropped: s.trunk_cropped,
            arms: arms.as_ref(),
            legs: Some(&legs),
            central_plane: plane_z,
            ..Default::default()
        };
        let plane = choose_control_plane(trunk_crop_axis(&s.trunk_report));
        let img = render_control_image(&data.vol, plane, &o)?;
        let path = ctx.file("body", "png");
        img.write_png(&path)?;
    }
    ctx.lap("extremities");

    let mut results = BTreeMap::new();
    for (task, tc) in &cfg.tasks.0 {
        if tc.selected_objs.is_empty() {
            continue;
        }
        let (lv, cm) = data.map(task)?;
        let mut masks = BTreeMap::new();
        for obj in &tc.selected_objs {
            let mut m = anatomy_mask(lv, cm, &selected_names(cm, obj, registry)?);
            if let Some(a) = &arms {
                Zip::from(&mut m).and(a).for_each(|m, a| *m &= !*a);
            }
            masks.insert(registry.normalize_anatomy_name(obj), m);
        }
        results.insert(task.clone(), body_component_analysis(&data.vol, &masks, tc, region, registry)?);
    }
    let metrics = InstanceMetrics {
        data_id: &id,
        region,
        bounds: bounds.as_ref(),
        tasks: results,
    };
    let path = ctx.file("metrics", "json");
    fs::write(&path, serde_json::to_string_pretty(&metrics)? + "\n")?;
    ctx.lap("body_composition");

    let features = match &cfg.voxel_features {
        Some(vf) => Some(voxel_stage(&mut ctx, &data, &vf.task, &vf.anatomy, registry)?),
        None => None,
    };
    ctx.lap("voxel_features");

    let sources: Vec<(&LabelVolume, &ClassMap)> = data.maps.values().map(|(l, c)| (l, c)).collect();
    let mut rec = ArchiveRecord::from_label_volumes(&id, &sources, Some(&data.vol), cfg.io.keep_image, registry)?;
    rec.features = features;
    let name = format!("{id}.{ARCHIVE_EXTENSION}");
    pack_archive(&rec, ctx.out_dir.join(&name))?;
    ctx.artifacts.push(name);
    ctx.lap("archive");

    Ok(Outcome {
        data_id: id,
        status: InstanceStatus::Completed,
        tags: ctx.tags,
        artifacts: ctx.artifacts,
        message: None,
        timings: ctx.timings,
    })
}

fn voxel_stage(ctx: &mut Ctx, data: &Loaded, task: &str, anatomy: &str, registry: &Registry) -> Result<FeatureMapStack> {
    let params = ctx.params.cloned().unwrap_or_default();
    let (lv, cm) = data.map(task)?;
    let mask = anatomy_mask(lv, cm, &selected_names(cm, anatomy, registry)?);
    let Some(r) = &ctx.cfg.robustness else {
        let id = format!("kernelRadius={},binWidth={}", params.kernel_radius, params.bin_width);
        return extract_voxel_features(&data.vol.data, &mask, &params, &id);
    };
    let stack = build_condition_stack(&data.vol.data, &mask, &params, r.condition_param()?, &r.target_range)?;
    let opts = RobustnessOptions {
        n_components: r.n_components,
        do_ttest: r.do_ttest,
        test_options: r.test_options,
    };
    let mut rows = Vec::new();
    let mut per_mode = Vec::new();
    for mode in [RobustnessMode::Baseline, RobustnessMode::Standardized, RobustnessMode::Sap] {
        let t = eval_feature_robustness(&stack, mode, &opts)?;
        per_mode.push(t.rows.iter().map(|r| r.occc).collect::<Vec<_>>());
        rows.extend(t.rows);
    }
    let stem = r.save_stats_path.rsplit_once('.').map_or(r.save_stats_path.as_str(), |(s, _)| s).to_string();
    let ext = r.save_stats_path.rsplit_once('.').map_or("csv", |(_, e)| e).to_string();
    let path = ctx.file(&stem, &ext);
    let mut buf = Vec::new();
    write_robustness_csv(&rows, &mut buf)?;
    fs::write(&path, buf)?;
    if r.plot_result && per_mode.iter().all(|v| !v.is_empty()) {
        let groups: Vec<&[f64]> = per_mode.iter().map(Vec::as_slice).collect();
        let path = ctx.file(&format!("{stem}_boxplot"), "png");
        render_boxplot(&groups, 200)?.write_png(&path)?;
    }
    Ok(stack)
}

fn process_isolated(cfg: &WorkflowConfig, params: Option<&ExtractionParams>, out_dir: &Path, inst: &Instance) -> Outcome {
    let ctx = Ctx {
        cfg,
        params,
        out_dir,
        data_id: &inst.data_id,
        tags: DatasetTag::new(),
        artifacts: Vec::new(),
        timings: BTreeMap::new(),
        clock: Instant::now(),
    };
    let start = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(|| process(ctx, inst)));
    let mut out = match res {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => failed(inst, e.to_string()),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            failed(inst, format!("internal error: {msg}"))
        }
    };
    out.timings.insert("total".into(), start.elapsed().as_millis() as u64);
    match out.status {
        InstanceStatus::Completed => log::info!("{}: completed", inst.data_id),
        _ => log::warn!("{}: {:?} ({})", inst.data_id, out.status, out.message.as_deref().unwrap_or("")),
    }
    out
}

fn failed(inst: &Instance, message: String) -> Outcome {
    let mut tags = DatasetTag::new();
    tags.add_tag_to_data(std_::PROCESSING_FAILED, &inst.data_id, std_::SEVERITY_ERROR);
    Outcome {
        data_id: inst.data_id.clone(),
        status: InstanceStatus::Failed,
        tags,
        artifacts: Vec::new(),
        message: Some(message),
        timings: BTreeMap::new(),
    }
}

/// Load the extraction params named by the config, if any.
pub fn extraction_params(cfg: &WorkflowConfig) -> Result<Option<ExtractionParams>> {
    match cfg.voxel_features.as_ref().and_then(|v| v.params.as_ref()) {
        Some(p) => ExtractionParams::from_yaml_file(p).map(Some),
        None => Ok(cfg.voxel_features.as_ref().map(|_| ExtractionParams::default())),
    }
}

/// Run every discovered instance and write the manifest and tag ledger.
///
/// Instances run concurrently on `cfg.workers` threads; their results are
/// merged by one collector in data id order, so outputs do not depend on
/// scheduling. Instance failures are recorded, not propagated.
pub fn run_pipeline(cfg: &WorkflowConfig) -> Result<(RunManifest, DatasetTag)> {
    let instances = discover_instances(&cfg.io.input_dir, &cfg.io.label_infix)?;
    let params = extraction_params(cfg)?;
    let out_dir = &cfg.io.output_dir;
    fs::create_dir_all(out_dir)?;
    let probe = out_dir.join(".aarchive_write_test");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| process_isolated(cfg, params.as_ref(), out_dir, inst))
            .collect()
    });

    let mut manifest = RunManifest::default();
    let mut tags = DatasetTag::new();
    for o in outcomes {
        tags.merge(&o.tags);
        manifest.0.insert(
            o.data_id.clone(),
            ManifestEntry {
                status: o.status,
                tags: o.tags.codes_for(&o.data_id),
                artifacts: o.artifacts,
                message: o.message,
                timings_ms: o.timings,
            },
        );
    }
    let tags = tags.sorted();
    export_dataset_tags(&tags, out_dir.join(DATASET_TAG_FILE))?;
    export_manifest(&manifest, out_dir.join(MANIFEST_FILE))?;
    Ok((manifest, tags))
}
