use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aarchive::archive::unpack_archive;
use aarchive::features::{
    build_condition_stack, central_plane, dense_feature_map, extract_voxel_features, ConditionParam, ExtractionParams,
    PlaneMode,
};
use aarchive::image_io::{read_label_volume, read_volume, reorient_volume, VolumeGrid, WORKING_ORIENTATION};
use aarchive::pipeline::{self, RunManifest};
use aarchive::registry::{load_class_map, Registry};
use aarchive::standardizer::{
    anatomy_mask, define_volume_bounds_by_anatomies, detect_hip_prosthesis, DatasetTag, ProsthesisParams,
};
use aarchive::stats::{
    auc, auc_confidence_interval, delong_test, icc, occc, ttest_with_auto_checks, Alternative, AutoTestOptions,
    IccForm, RaterMatrix, RocData,
};
use aarchive::viz::{
    apply_window, overlay_to_rgba, render_control_image, render_feature_overlay, select_window_for_anatomy,
    ControlOverlays, Plane, RgbaImage, WindowSetting, BONE_WINDOW, LUNG_WINDOW, SOFT_TISSUE_WINDOW,
};
use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{s, Array3};
use serde_json::json;

#[derive(Parser)]
#[command(name = "aarchive", version, about = "CT anatomy archive, volume standardization and voxel radiomics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured workflow over an input directory
    Run {
        #[arg(long)]
        config: PathBuf,
        /// worker threads (default: logical cores)
        #[arg(long)]
        workers: Option<usize>,
        /// list the discovered instances without processing them
        #[arg(long)]
        dry_run: bool,
    },
    /// Volume bounds from reference anatomies, with optional prosthesis check
    Bounds(BoundsArgs),
    /// Voxel-based first-order features of one structure, written as CSV
    Features(FeaturesArgs),
    #[command(subcommand)]
    /// Hypothesis tests, agreement and ROC comparison on CSV columns
    Stats(StatsCmd),
    #[command(subcommand)]
    /// PNG renderings of volumes and feature maps
    Render(RenderCmd),
    /// Write the bundled phantom dataset and a matching workflow config
    Phantoms {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    volume: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// segmentation task of the label map
    #[arg(long, default_value = "total")]
    task: String,
    /// segmentation model version (1 or 2)
    #[arg(long, default_value_t = 2)]
    seg_version: u8,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    input: LabelArgs,
    #[arg(long)]
    upper: String,
    #[arg(long)]
    lower: String,
    /// border margin per axis, comma separated
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0usize, 0, 0])]
    crop_addon: Vec<usize>,
    /// look for a hip prosthesis above the lower bound
    #[arg(long)]
    prosthesis: bool,
    /// write a coronal control image
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    input: LabelArgs,
    /// structure or group selector
    #[arg(long)]
    anatomy: String,
    /// extraction params YAML
    #[arg(long)]
    params: Option<PathBuf>,
    /// vary one setting across conditions
    #[arg(long, value_enum, requires = "values")]
    vary: Option<VaryArg>,
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VaryArg {
    KernelRadius,
    BinWidth,
}

#[derive(Subcommand)]
enum StatsCmd {
    /// Compare two CSV columns with automatically chosen tests
    Compare {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        paired: bool,
        #[arg(long, default_value = "two-sided")]
        alternative: String,
        /// also compare variances
        #[arg(long)]
        variance: bool,
    },
    /// OCCC and ICC with the given columns as raters
    Agreement {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
        #[arg(long, default_value = "2,1")]
        icc_form: String,
    },
    /// DeLong comparison of two scores against one 0/1 truth column
    Delong {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        truth: String,
        #[arg(long)]
        score1: String,
        #[arg(long)]
        score2: String,
        /// the scores come from different cases
        #[arg(long)]
        unpaired: bool,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
}

#[derive(Subcommand)]
enum RenderCmd {
    /// Maximum intensity projection
    Control {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long, value_enum, default_value = "coronal")]
        plane: PlaneArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Windowed transverse slice
    Window {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        z: usize,
        /// lung, soft_tissue, bone or an anatomy name
        #[arg(long, default_value = "soft_tissue")]
        window: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature map overlay of one slice from an archive
    Overlay {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        feature: String,
        /// condition id (default: the first one)
        #[arg(long)]
        condition: Option<String>,
        /// slice (default: central plane of the feature region)
        #[arg(long)]
        z: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlaneArg {
    Coronal,
    Sagittal,
    Transverse,
}

impl From<PlaneArg> for Plane {
    fn from(p: PlaneArg) -> Self {
        match p {
            PlaneArg::Coronal => Plane::Coronal,
            PlaneArg::Sagittal => Plane::Sagittal,
            PlaneArg::Transverse => Plane::Transverse,
        }
    }
}

fn load_volume(path: &Path) -> anyhow::Result<VolumeGrid> {
    let v = read_volume(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(reorient_volume(&v, WORKING_ORIENTATION)?)
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cmd_run(config: &Path, workers: Option<usize>, dry_run: bool) -> anyhow::Result<i32> {
    let mut cfg = pipeline::load_workflow_config(config)?;
    if workers.is_some() {
        cfg.workers = workers;
    }
    if dry_run {
        let found = pipeline::discover_instances(&cfg.io.input_dir, &cfg.io.label_infix)?;
        pipeline::extraction_params(&cfg)?;
        let plan: BTreeMap<_, _> = found
            .iter()
            .map(|i| (i.data_id.clone(), i.labels.keys().cloned().collect::<Vec<_>>()))
            .collect();
        print_json(&plan)?;
        return Ok(0);
    }
    let (manifest, _) = pipeline::run_pipeline(&cfg)?;
    summarize(&manifest);
    Ok(manifest.exit_code())
}

fn summarize(m: &RunManifest) {
    use pipeline::InstanceStatus::*;
    eprintln!(
        "{} completed, {} skipped, {} failed",
        m.count(Completed),
        m.count(Skipped),
        m.count(Failed)
    );
    for (id, e) in &m.0 {
        if e.status != Completed {
            eprintln!("  {id}: {:?} {}", e.status, e.message.as_deref().unwrap_or(""));
        }
    }
}

fn cmd_bounds(a: &BoundsArgs) -> anyhow::Result<()> {
    let reg = Registry::builtin();
    let cm = load_class_map(&a.input.task, a.input.seg_version, true)?;
    let lv = read_label_volume(&a.input.labels, a.input.task.as_str())?.reorient(WORKING_ORIENTATION)?;
    let addon = [a.crop_addon[0], a.crop_addon[1], a.crop_addon[2]];
    let b = define_volume_bounds_by_anatomies(&lv, &cm, &a.upper, &a.lower, addon, reg)?;
    let mut tag = DatasetTag::new();
    let id = a
        .input
        .volume
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.trim_end_matches(".gz").trim_end_matches(".nii").to_string())
        .unwrap_or_default();
    b.record_tags(&mut tag, &id);
    let mut report = None;
    if (a.prosthesis || a.png.is_some()) && b.is_valid() {
        let vol = load_volume(&a.input.volume)?;
        let (lo, _) = b.planes()?;
        let params = ProsthesisParams::default();
        let r = detect_hip_prosthesis(&vol, lo, &params, a.prosthesis.then_some(&mut tag), &id)?;
        if let Some(p) = &a.png {
            let o = ControlOverlays {
                bounds: Some(b.planes()?),
                prosthesis: a.prosthesis.then_some(&r),
                bright_threshold: Some(params.bright.threshold),
                ..Default::default()
            };
            render_control_image(&vol, Plane::Coronal, &o)?.write_png(p)?;
        }
        report = a.prosthesis.then_some(r.detected);
    }
    print_json(&json!({"bounds": b, "prosthesis_detected": report, "tags": tag}))
}

fn cmd_features(a: &FeaturesArgs) -> anyhow::Result<()> {
    let reg = Registry::builtin();
    let vol = load_volume(&a.input.volume)?;
    let cm = load_class_map(&a.input.task, a.input.seg_version, true)?;
    let lv = read_label_volume(&a.input.labels, a.input.task.as_str())?.reorient(WORKING_ORIENTATION)?;
    let graph = reg.graph().restricted_to(&cm.names());
    let names = reg.expand_in(&graph, &a.anatomy)?;
    let mask = anatomy_mask(&lv, &cm, &names);
    let params = match &a.params {
        Some(p) => ExtractionParams::from_yaml_file(p)?,
        None => ExtractionParams::default(),
    };
    let stack = match a.vary {
        None => {
            let id = format!("kernelRadius={},binWidth={}", params.kernel_radius, params.bin_width);
            extract_voxel_features(&vol.data, &mask, &params, &id)?
        }
        Some(v) => {
            let p = match v {
                VaryArg::KernelRadius => ConditionParam::KernelRadius,
                VaryArg::BinWidth => ConditionParam::BinWidth,
            };
            build_condition_stack(&vol.data, &mask, &params, p, &a.values)?
        }
    };
    let f = std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    stack.write_csv(std::io::BufWriter::new(f))?;
    eprintln!("{} voxels, {} conditions", stack.n(), stack.condition_ids().len());
    Ok(())
}

fn read_columns(path: &Path, names: &[&str]) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| anyhow!("column '{n}' not in {}", path.display()))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("").trim();
            let v: f64 = field
                .parse()
                .map_err(|_| anyhow!("row {}: '{field}' in column '{}' is not a number", line + 2, names[c]))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

fn cmd_stats(c: &StatsCmd) -> anyhow::Result<()> {
    match c {
        StatsCmd::Compare {
            csv,
            a,
            b,
            paired,
            alternative,
            variance,
        } => {
            let cols = read_columns(csv, &[a, b])?;
            let alt: Alternative = alternative.parse()?;
            let r = ttest_with_auto_checks(&cols[0], &cols[1], *paired, alt, &AutoTestOptions::default(), *variance)?;
            print_json(&r)
        }
        StatsCmd::Agreement { csv, columns, icc_form } => {
            let names: Vec<&str> = columns.iter().map(String::as_str).collect();
            let cols = read_columns(csv, &names)?;
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let m = RaterMatrix::from_columns(&refs)?;
            let form: IccForm = icc_form.parse()?;
            print_json(&json!({"occc": occc(&m)?, "icc": icc(&m, form)?, "icc_form": form.to_string()}))
        }
        StatsCmd::Delong {
            csv,
            truth,
            score1,
            score2,
            unpaired,
            level,
        } => {
            let cols = read_columns(csv, &[truth, score1, score2])?;
            let t: Vec<bool> = cols[0].iter().map(|v| *v != 0.0).collect();
            let r1 = RocData::new(cols[1].clone(), t.clone())?;
            let r2 = RocData::new(cols[2].clone(), t)?;
            let d = delong_test(&r1, &r2, !unpaired)?;
            print_json(&json!({
                "auc1": auc(&r1), "auc2": auc(&r2),
                "ci1": auc_confidence_interval(&r1, *level)?, "ci2": auc_confidence_interval(&r2, *level)?,
                "z": d.z, "p_value": d.p_value
            }))
        }
    }
}

fn window_by_name(name: &str) -> anyhow::Result<WindowSetting> {
    Ok(match name {
        "lung" => LUNG_WINDOW,
        "soft_tissue" | "soft-tissue" => SOFT_TISSUE_WINDOW,
        "bone" => BONE_WINDOW,
        other => select_window_for_anatomy(other, Registry::builtin())?,
    })
}

fn cmd_render(c: &RenderCmd) -> anyhow::Result<()> {
    match c {
        RenderCmd::Control { volume, plane, out } => {
            let vol = load_volume(volume)?;
            render_control_image(&vol, (*plane).into(), &ControlOverlays::default())?.write_png(out)?;
        }
        RenderCmd::Window { volume, z, window, out } => {
            let vol = load_volume(volume)?;
            let depth = vol.shape()[2];
            if *z >= depth {
                bail!("slice {z} outside 0..{depth}");
            }
            let w = window_by_name(window)?;
            RgbaImage::from_gray(&apply_window(&vol.data.slice(s![.., .., *z]), w)).write_png(out)?;
        }
        RenderCmd::Overlay {
            archive,
            feature,
            condition,
            z,
            out,
        } => {
            let rec = unpack_archive(archive)?;
            let stack = rec
                .features
                .ok_or_else(|| anyhow!("{} holds no feature maps", archive.display()))?;
            let cond = match condition {
                Some(c) => c.clone(),
                None => stack
                    .condition_ids()
                    .first()
                    .map(|s| s.to_string())
                    .ok_or_else(|| anyhow!("no conditions in archive"))?,
            };
            let fmap = dense_feature_map(&stack, &cond, feature, 0.0)?;
            let mut mask = Array3::from_elem(stack.shape, false);
            for c in &stack.coords {
                mask[[c[0] as usize, c[1] as usize, c[2] as usize]] = true;
            }
            let z = match z {
                Some(z) => *z,
                None => central_plane(&mask, PlaneMode::MaxCrossSection).ok_or_else(|| anyhow!("empty feature region"))?,
            };
            overlay_to_rgba(&render_feature_overlay(&fmap, &mask, z)?).write_png(out)?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.cmd {
        Cmd::Run {
            config,
            workers,
            dry_run,
        } => return cmd_run(&config, workers, dry_run),
        Cmd::Bounds(a) => cmd_bounds(&a)?,
        Cmd::Features(a) => cmd_features(&a)?,
        Cmd::Stats(c) => cmd_stats(&c)?,
        Cmd::Render(c) => cmd_render(&c)?,
        Cmd::Phantoms { out } => {
            let ids = pipeline::write_phantom_dataset(&out)?;
            eprintln!("wrote {} phantoms and workflow.json to {}", ids.len(), out.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AARCHIVE_LOG", "warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
