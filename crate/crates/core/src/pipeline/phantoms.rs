use std::fs;
use std::path::Path;

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use crate::error::Result;
use crate::image_io::{write_label_volume, write_volume, Affine, LabelVolume, VolumeGrid};
use crate::registry::{load_class_map, ClassMap};
use crate::standardizer::{BODY_EXTREMITIES_LABEL, BODY_TRUNK_LABEL};

pub const PHANTOM_SHAPE: [usize; 3] = [32, 40, 64];
pub const PHANTOM_SPACING: [f64; 3] = [2.0, 2.0, 2.0];
/// Top plane of the vertebrae_L1 block.
pub const PHANTOM_UPPER_Z: usize = 50;
/// Lowest plane of the hip blocks.
pub const PHANTOM_LOWER_Z: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    Plain,
    /// arms hanging beside the trunk
    Arms,
    /// metal rod through the left hip
    Prosthesis,
}

/// CT volume and label maps of one synthetic torso.
pub struct Phantom {
    pub data_id: String,
    pub volume: VolumeGrid,
    /// task name -> labels
    pub labels: Vec<(String, LabelVolume)>,
}

type Box3 = [std::ops::Range<usize>; 3];

fn in_box(b: &Box3, i: usize, j: usize, k: usize) -> bool {
    b[0].contains(&i) && b[1].contains(&j) && b[2].contains(&k)
}

fn paint(labels: &mut Array3<u16>, cm: &ClassMap, name: &str, b: Box3) {
    let l = cm.label_of(name).unwrap_or_else(|| panic!("{name} missing from {}", cm.task_name));
    for ((i, j, k), v) in labels.indexed_iter_mut() {
        if in_box(&b, i, j, k) {
            *v = l;
        }
    }
}

/// Deterministic torso phantom: elliptic trunk with a fat rim, paraspinal
/// muscles, a textured right kidney, L1 above and both hips near the
/// bottom.
pub fn make_phantom(kind: PhantomKind, seed: u64) -> Result<Phantom> {
    let [ni, nj, nk] = PHANTOM_SHAPE;
    let total = load_class_map("total", 2, true)?;
    let tissue = load_class_map("tissue_types", 2, true)?;
    let body_cm = load_class_map("body", 2, true)?;
    let (ci, cj) = ((ni as f64 - 1.0) / 2.0, (nj as f64 - 1.0) / 2.0);
    let ell = |i: usize, j: usize, shrink: f64| {
        ((i as f64 - ci) / (13.0 - shrink)).powi(2) + ((j as f64 - cj) / (15.0 - shrink)).powi(2) < 1.0
    };

    let mut tot = Array3::<u16>::zeros((ni, nj, nk));
    let spine_muscle: [Box3; 2] = [[21..26, 13..18, 14..60], [21..26, 22..27, 14..60]];
    paint(&mut tot, &total, "autochthon_right", spine_muscle[0].clone());
    paint(&mut tot, &total, "autochthon_left", spine_muscle[1].clone());
    paint(&mut tot, &total, "vertebrae_L1", [19..24, 18..22, 44..PHANTOM_UPPER_Z + 1]);
    paint(&mut tot, &total, "hip_right", [11..20, 9..16, PHANTOM_LOWER_Z + 1..17]);
    paint(&mut tot, &total, "hip_left", [11..20, 24..31, PHANTOM_LOWER_Z..17]);
    paint(&mut tot, &total, "femur_right", [13..18, 10..15, 0..PHANTOM_LOWER_Z + 1]);
    paint(&mut tot, &total, "femur_left", [13..18, 25..30, 0..PHANTOM_LOWER_Z]);
    paint(&mut tot, &total, "kidney_right", [15..21, 11..17, 30..40]);
    paint(&mut tot, &total, "liver", [9..16, 10..17, 40..56]);
    let arms: [Box3; 2] = [[12..20, 0..3, 28..60], [12..20, 37..40, 28..60]];
    if kind == PhantomKind::Arms {
        paint(&mut tot, &total, "humerus_right", [15..17, 1..2, 34..56]);
        paint(&mut tot, &total, "humerus_left", [15..17, 38..39, 34..56]);
    }

    let mut tis = Array3::<u16>::zeros((ni, nj, nk));
    let mut body = Array3::<u16>::zeros((ni, nj, nk));
    let sub = tissue.label_of("subcutaneous_fat").expect("tissue map");
    let torso = tissue.label_of("torso_fat").expect("tissue map");
    let muscle = tissue.label_of("skeletal_muscle").expect("tissue map");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Array3::from_elem((ni, nj, nk), -1000.0);
    for ((i, j, k), v) in data.indexed_iter_mut() {
        let eps = noise.sample(&mut rng);
        let in_arm = kind == PhantomKind::Arms && arms.iter().any(|b| in_box(b, i, j, k));
        if ell(i, j, 0.0) {
            body[[i, j, k]] = BODY_TRUNK_LABEL;
            if !ell(i, j, 2.0) {
                tis[[i, j, k]] = sub;
                *v = -100.0 + 8.0 * eps;
                continue;
            }
            let name = total.name_of(tot[[i, j, k]]);
            *v = match name {
                Some("vertebrae_L1" | "hip_left" | "hip_right" | "femur_left" | "femur_right") => 700.0 + 30.0 * eps,
                Some("autochthon_left" | "autochthon_right") => {
                    tis[[i, j, k]] = muscle;
                    // sparse intramuscular fat and low-attenuation patches
                    match (i + 3 * j + 7 * k) % 17 {
                        0 => -60.0 + 5.0 * eps,
                        1 | 2 => 10.0 + 4.0 * eps,
                        _ => 55.0 + 8.0 * eps,
                    }
                }
                Some("kidney_right") => 30.0 + 12.0 * ((i + j) as f64 * 0.9).sin() + 6.0 * (k as f64 * 0.7).cos() + 4.0 * eps,
                Some("liver") => 60.0 + 5.0 * eps,
                _ => {
                    if (i * 5 + j * 3 + k) % 11 == 0 {
                        tis[[i, j, k]] = torso;
                        -90.0 + 6.0 * eps
                    } else {
                        20.0 + 5.0 * eps
                    }
                }
            };
        } else if in_arm {
            body[[i, j, k]] = BODY_EXTREMITIES_LABEL;
            *v = if total.name_of(tot[[i, j, k]]).is_some_and(|n| n.starts_with("humerus")) {
                700.0 + 30.0 * eps
            } else {
                tis[[i, j, k]] = muscle;
                50.0 + 8.0 * eps
            };
        }
    }
    if kind == PhantomKind::Prosthesis {
        for ((i, j, k), v) in data.indexed_iter_mut() {
            if in_box(&[14..18, 24..30, 2..26], i, j, k) {
                *v = 3000.0;
            }
        }
    }
    let affine = Affine::pls(PHANTOM_SPACING);
    let data_id = match kind {
        PhantomKind::Plain => "phantom01",
        PhantomKind::Arms => "phantom02",
        PhantomKind::Prosthesis => "phantom03",
    };
    debug_assert!(body_cm.label_of("body_trunc") == Some(BODY_TRUNK_LABEL));
    Ok(Phantom {
        data_id: data_id.to_string(),
        volume: VolumeGrid::new(data.mapv(f64::round), affine)?,
        labels: vec![
            ("total".into(), LabelVolume::new(tot, affine, "total")),
            ("tissue_types".into(), LabelVolume::new(tis, affine, "tissue_types")),
            ("body".into(), LabelVolume::new(body, affine, "body")),
        ],
    })
}

pub const EXAMPLE_VOXEL_YAML: &str = "imageType:
  Original: {}
featureClass:
  firstorder:
setting:
  binWidth: 25
  force2D: false
  label: 1
voxelSetting:
  kernelRadius: 2
  maskedKernel: true
  initValue: 0
  voxelBatch: 10000
";

/// Workflow config for the bundled phantoms.
pub fn demo_workflow_config(input_dir: &str, output_dir: &str) -> Value {
    json!({
        "io": {"input_dir": input_dir, "output_dir": output_dir},
        "target_eva_config": {
            "total": {"refObjUB": "vertebrae_L1", "refObjLB": "pelvic", "excludeProsthesisSamples": true},
            "tissue_types": {
                "selectedObjs": ["subcutaneous_fat", "torso_fat", "skeletal_muscle"],
                "enforceMuscleRange": true,
                "enforceFatRange": true
            }
        },
        "voxel_features": {"task": "total", "anatomy": "kidney_right", "params": "exampleVoxel.yaml"},
        "robustness": {
            "target_param": "kernelRadius",
            "target_range": [2, 3, 4, 5],
            "n_components": 2,
            "do_ttest": true,
            "plot_result": true,
            "save_stats_path": "robustness.csv"
        }
    })
}

/// Write the three phantoms to `<dir>/phantoms`, plus `workflow.json` and
/// `exampleVoxel.yaml` in `dir`. Returns the data ids.
pub fn write_phantom_dataset(dir: &Path) -> Result<Vec<String>> {
    let input = dir.join("phantoms");
    fs::create_dir_all(&input)?;
    let mut ids = Vec::new();
    for (n, kind) in [PhantomKind::Plain, PhantomKind::Arms, PhantomKind::Prosthesis].into_iter().enumerate() {
        let p = make_phantom(kind, 1000 + n as u64)?;
        write_volume(&p.volume, input.join(format!("{}.nii.gz", p.data_id)))?;
        for (task, lv) in &p.labels {
            write_label_volume(lv, input.join(format!("{}_seg_{task}.nii.gz", p.data_id)))?;
        }
        ids.push(p.data_id);
    }
    fs::write(dir.join("exampleVoxel.yaml"), EXAMPLE_VOXEL_YAML)?;
    let cfg = demo_workflow_config("phantoms", "output");
    fs::write(dir.join("workflow.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;
    Ok(ids)
}
