use std::collections::BTreeMap;

use ndarray::Array3;
use rayon::prelude::*;

use super::binwidth::optimal_hist_bin_width;
use super::params::ExtractionParams;
use super::stack::FeatureMapStack;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FirstOrderFeature {
    Energy,
    Entropy,
    Minimum,
    Percentile10,
    Percentile90,
    Maximum,
    Mean,
    Median,
    InterquartileRange,
    Range,
    MeanAbsoluteDeviation,
    RobustMeanAbsoluteDeviation,
    RootMeanSquared,
    Skewness,
    Kurtosis,
    Variance,
    Uniformity,
}

impl FirstOrderFeature {
    pub const ALL: [FirstOrderFeature; 17] = [
        Self::Energy,
        Self::Entropy,
        Self::Minimum,
        Self::Percentile10,
        Self::Percentile90,
        Self::Maximum,
        Self::Mean,
        Self::Median,
        Self::InterquartileRange,
        Self::Range,
        Self::MeanAbsoluteDeviation,
        Self::RobustMeanAbsoluteDeviation,
        Self::RootMeanSquared,
        Self::Skewness,
        Self::Kurtosis,
        Self::Variance,
        Self::Uniformity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Energy => "Energy",
            Self::Entropy => "Entropy",
            Self::Minimum => "Minimum",
            Self::Percentile10 => "10Percentile",
            Self::Percentile90 => "90Percentile",
            Self::Maximum => "Maximum",
            Self::Mean => "Mean",
            Self::Median => "Median",
            Self::InterquartileRange => "InterquartileRange",
            Self::Range => "Range",
            Self::MeanAbsoluteDeviation => "MeanAbsoluteDeviation",
            Self::RobustMeanAbsoluteDeviation => "RobustMeanAbsoluteDeviation",
            Self::RootMeanSquared => "RootMeanSquared",
            Self::Skewness => "Skewness",
            Self::Kurtosis => "Kurtosis",
            Self::Variance => "Variance",
            Self::Uniformity => "Uniformity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Linear-interpolated percentile of sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// First-order statistics of one neighbourhood.
///
/// Entropy and uniformity are computed on bins `floor((x - min) / w)`
/// anchored at the neighbourhood minimum; every other feature uses the
/// raw values. Moments are population moments and kurtosis is not
/// excess kurtosis. Flat neighbourhoods get skewness and kurtosis 0.
pub fn first_order_features(values: &[f64], bin_width: f64, features: &[FirstOrderFeature]) -> Vec<f64> {
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let mean = values.iter().sum::<f64>() / n;
    let central = |p: i32| values.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let m2 = central(2);
    let energy = values.iter().map(|v| v * v).sum::<f64>();
    let histogram = || {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(((v - min) / bin_width).floor() as i64).or_default() += 1;
        }
        counts.into_values().map(move |c| c as f64 / n)
    };
    features
        .iter()
        .map(|f| match f {
            FirstOrderFeature::Energy => energy,
            FirstOrderFeature::Entropy => -histogram().map(|p| p * (p + f64::EPSILON).log2()).sum::<f64>(),
            FirstOrderFeature::Uniformity => histogram().map(|p| p * p).sum(),
            FirstOrderFeature::Minimum => min,
            FirstOrderFeature::Maximum => max,
            FirstOrderFeature::Range => max - min,
            FirstOrderFeature::Percentile10 => percentile_sorted(&sorted, 10.0),
            FirstOrderFeature::Percentile90 => percentile_sorted(&sorted, 90.0),
            FirstOrderFeature::Median => percentile_sorted(&sorted, 50.0),
            FirstOrderFeature::InterquartileRange => {
                percentile_sorted(&sorted, 75.0) - percentile_sorted(&sorted, 25.0)
            }
            FirstOrderFeature::Mean => mean,
            FirstOrderFeature::Variance => m2,
            FirstOrderFeature::MeanAbsoluteDeviation => values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n,
            FirstOrderFeature::RobustMeanAbsoluteDeviation => {
                let (p10, p90) = (percentile_sorted(&sorted, 10.0), percentile_sorted(&sorted, 90.0));
                let inner: Vec<f64> = sorted.iter().copied().filter(|v| *v >= p10 && *v <= p90).collect();
                let m = inner.iter().sum::<f64>() / inner.len() as f64;
                inner.iter().map(|v| (v - m).abs()).sum::<f64>() / inner.len() as f64
            }
            FirstOrderFeature::RootMeanSquared => (energy / n).sqrt(),
            FirstOrderFeature::Skewness => {
                if m2 > 0.0 {
                    central(3) / m2.powf(1.5)
                } else {
                    0.0
                }
            }
            FirstOrderFeature::Kurtosis => {
                if m2 > 0.0 {
                    central(4) / (m2 * m2)
                } else {
                    0.0
                }
            }
        })
        .collect()
}

fn neighbourhood(image: &Array3<f64>, mask: &Array3<bool>, c: [u32; 3], radius: usize, masked: bool) -> Vec<f64> {
    let sh = image.shape();
    let range = |d: usize| {
        let x = c[d] as usize;
        x.saturating_sub(radius)..(x + radius + 1).min(sh[d])
    };
    let mut out = Vec::with_capacity((2 * radius + 1).pow(3));
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                if !masked || mask[[i, j, k]] {
                    out.push(image[[i, j, k]]);
                }
            }
        }
    }
    out
}

/// Voxel-wise first-order features of every voxel in `mask`.
///
/// Each voxel's neighbourhood is the Chebyshev ball of radius
/// `kernel_radius`, clipped to the image and, with `masked_kernel`, to the
/// mask. Voxels are processed `voxel_batch` at a time; the result does not
/// depend on the batch size. Returns C-ordered coordinates and one vector
/// per requested feature.
pub fn voxel_features(
    image: &Array3<f64>,
    mask: &Array3<bool>,
    params: &ExtractionParams,
) -> Result<(Vec<[u32; 3]>, Vec<Vec<f64>>)> {
    params.validate()?;
    if image.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            expected: image.shape().to_vec(),
            found: mask.shape().to_vec(),
        });
    }
    let coords: Vec<[u32; 3]> = mask
        .indexed_iter()
        .filter(|(_, m)| **m)
        .map(|((i, j, k), _)| [i as u32, j as u32, k as u32])
        .collect();
    if coords.is_empty() {
        return Err(Error::InsufficientData("empty region of interest".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(coords.len());
    for batch in coords.chunks(params.voxel_batch) {
        let part: Vec<Vec<f64>> = batch
            .par_iter()
            .map(|c| {
                let vals = neighbourhood(image, mask, *c, params.kernel_radius, params.masked_kernel);
                first_order_features(&vals, params.bin_width, &params.features)
            })
            .collect();
        rows.extend(part);
    }
    let columns = (0..params.features.len())
        .map(|f| rows.iter().map(|r| r[f]).collect())
        .collect();
    Ok((coords, columns))
}

/// Feature maps of one region as a single-condition stack.
pub fn extract_voxel_features(
    image: &Array3<f64>,
    mask: &Array3<bool>,
    params: &ExtractionParams,
    condition: &str,
) -> Result<FeatureMapStack> {
    let (coords, columns) = voxel_features(image, mask, params)?;
    let sh = image.shape();
    let mut stack = FeatureMapStack::new([sh[0], sh[1], sh[2]], coords);
    for (f, v) in params.features.iter().zip(columns) {
        stack.insert(condition, f.name(), v)?;
    }
    Ok(stack)
}

/// Feature maps for every label in `selected`, keyed by label.
///
/// With `auto_bin_width` the bin width of each label is chosen from its
/// voxel values with Doane's rule and snapped to the given targets.
pub fn extract_label_features(
    image: &Array3<f64>,
    labels: &Array3<u16>,
    selected: &[u16],
    params: &ExtractionParams,
    auto_bin_width: Option<&[f64]>,
) -> Result<BTreeMap<u16, FeatureMapStack>> {
    let mut out = BTreeMap::new();
    for &l in selected {
        let mask = labels.mapv(|v| v == l);
        let mut p = params.clone();
        if let Some(targets) = auto_bin_width {
            let vals: Vec<f64> = image.iter().zip(mask.iter()).filter_map(|(v, m)| m.then_some(*v)).collect();
            p.bin_width = optimal_hist_bin_width(&vals, targets)?;
        }
        out.insert(l, extract_voxel_features(image, &mask, &p, &condition_id(&p))?);
    }
    Ok(out)
}

/// Extraction setting varied across conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConditionParam {
    #[serde(rename = "kernelRadius")]
    KernelRadius,
    #[serde(rename = "binWidth")]
    BinWidth,
}

impl ConditionParam {
    pub fn key(self) -> &'static str {
        match self {
            ConditionParam::KernelRadius => "kernelRadius",
            ConditionParam::BinWidth => "binWidth",
        }
    }
}

fn condition_id(p: &ExtractionParams) -> String {
    format!("kernelRadius={},binWidth={}", p.kernel_radius, p.bin_width)
}

/// One stack holding the feature maps of `mask` for each value of `param`.
///
/// Condition ids are `<param>=<value>`.
pub fn build_condition_stack(
    image: &Array3<f64>,
    mask: &Array3<bool>,
    base: &ExtractionParams,
    param: ConditionParam,
    values: &[f64],
) -> Result<FeatureMapStack> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter("at least two condition values are needed".into()));
    }
    let mut stack: Option<FeatureMapStack> = None;
    for &v in values {
        let mut p = base.clone();
        match param {
            ConditionParam::KernelRadius => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!("kernel radius {v} is not a positive integer")));
                }
                p.kernel_radius = v as usize;
            }
            ConditionParam::BinWidth => p.bin_width = v,
        }
        let id = format!("{}={v}", param.key());
        let s = extract_voxel_features(image, mask, &p, &id)?;
        match stack.as_mut() {
            None => stack = Some(s),
            Some(acc) => acc.conditions.extend(s.conditions),
        }
    }
    let stack = stack.expect("at least two values");
    if stack.conditions.len() != values.len() {
        return Err(Error::InvalidParameter("duplicate condition values".into()));
    }
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(values: &[f64], w: f64, f: FirstOrderFeature) -> f64 {
        first_order_features(values, w, &[f])[0]
    }

    #[test]
    fn hand_computed_statistics() {
        let v = [1.0, 2.0, 3.0, 4.0, 10.0];
        use FirstOrderFeature::*;
        assert_eq!(get(&v, 1.0, Energy), 130.0);
        assert_eq!(get(&v, 1.0, Mean), 4.0);
        assert_eq!(get(&v, 1.0, Median), 3.0);
        assert_eq!(get(&v, 1.0, Variance), 10.0);
        assert_eq!(get(&v, 1.0, Range), 9.0);
        assert!((get(&v, 1.0, Percentile10) - 1.4).abs() < 1e-12);
        assert!((get(&v, 1.0, Percentile90) - 7.6).abs() < 1e-12);
        assert_eq!(get(&v, 1.0, InterquartileRange), 2.0);
        assert_eq!(get(&v, 1.0, MeanAbsoluteDeviation), 2.4);
        // values within [1.4, 7.6]: 2, 3, 4
        assert!((get(&v, 1.0, RobustMeanAbsoluteDeviation) - 2.0 / 3.0).abs() < 1e-12);
        assert!((get(&v, 1.0, RootMeanSquared) - 26f64.sqrt()).abs() < 1e-12);
        // central moments: m3 = (-27 - 8 - 1 + 0 + 216) / 5 = 36
        assert!((get(&v, 1.0, Skewness) - 36.0 / 10f64.powf(1.5)).abs() < 1e-12);
        // m4 = (81 + 16 + 1 + 0 + 1296) / 5 = 278.8
        assert!((get(&v, 1.0, Kurtosis) - 2.788).abs() < 1e-12);
        // width 5: bins 0,0,0,0,1
        let ent = -(0.8f64 * 0.8f64.log2() + 0.2 * 0.2f64.log2());
        assert!((get(&v, 5.0, Entropy) - ent).abs() < 1e-12);
        assert!((get(&v, 5.0, Uniformity) - 0.68).abs() < 1e-12);
    }

    #[test]
    fn flat_neighbourhood() {
        let v = [7.0; 9];
        use FirstOrderFeature::*;
        assert_eq!(get(&v, 25.0, Skewness), 0.0);
        assert_eq!(get(&v, 25.0, Kurtosis), 0.0);
        assert_eq!(get(&v, 25.0, Uniformity), 1.0);
        assert!(get(&v, 25.0, Entropy).abs() < 1e-12);
    }

    #[test]
    fn names_round_trip() {
        for f in FirstOrderFeature::ALL {
            assert_eq!(FirstOrderFeature::from_name(f.name()), Some(f));
        }
    }

    fn phantom() -> (Array3<f64>, Array3<bool>) {
        let img = Array3::from_shape_fn((7, 8, 9), |(i, j, k)| ((i * 31 + j * 17 + k * 7) % 23) as f64 * 3.0);
        let mask = Array3::from_shape_fn((7, 8, 9), |(i, j, k)| i > 0 && j > 1 && k < 7 && (i + j + k) % 5 != 0);
        (img, mask)
    }

    #[test]
    fn masked_kernel_matches_direct_computation() {
        let (img, mask) = phantom();
        let p = ExtractionParams {
            bin_width: 10.0,
            kernel_radius: 1,
            ..Default::default()
        };
        let (coords, cols) = voxel_features(&img, &mask, &p).unwrap();
        let c = coords[5];
        let mut vals = Vec::new();
        for i in c[0].saturating_sub(1)..=(c[0] + 1).min(6) {
            for j in c[1].saturating_sub(1)..=(c[1] + 1).min(7) {
                for k in c[2].saturating_sub(1)..=(c[2] + 1).min(8) {
                    let idx = [i as usize, j as usize, k as usize];
                    if mask[idx] {
                        vals.push(img[idx]);
                    }
                }
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let mi = p.features.iter().position(|f| *f == FirstOrderFeature::Mean).unwrap();
        assert!((cols[mi][5] - mean).abs() < 1e-12);
    }

    #[test]
    fn batch_size_does_not_matter() {
        let (img, mask) = phantom();
        let a = ExtractionParams {
            voxel_batch: 7,
            ..Default::default()
        };
        let b = ExtractionParams {
            voxel_batch: 100000,
            ..Default::default()
        };
        assert_eq!(voxel_features(&img, &mask, &a).unwrap(), voxel_features(&img, &mask, &b).unwrap());
    }

    #[test]
    fn unmasked_kernel_sees_outside() {
        let mut img = Array3::zeros((5, 5, 5));
        img[[2, 2, 3]] = 100.0;
        let mut mask = Array3::from_elem((5, 5, 5), false);
        mask[[2, 2, 2]] = true;
        let mut p = ExtractionParams {
            features: vec![FirstOrderFeature::Maximum],
            ..Default::default()
        };
        assert_eq!(voxel_features(&img, &mask, &p).unwrap().1[0], vec![0.0]);
        p.masked_kernel = false;
        assert_eq!(voxel_features(&img, &mask, &p).unwrap().1[0], vec![100.0]);
    }

    #[test]
    fn condition_stack() {
        let (img, mask) = phantom();
        let s = build_condition_stack(
            &img,
            &mask,
            &ExtractionParams::default(),
            ConditionParam::KernelRadius,
            &[1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert_eq!(s.condition_ids().len(), 4);
        assert_eq!(s.feature_names().len(), 17);
        s.validate().unwrap();
        assert!(build_condition_stack(&img, &mask, &ExtractionParams::default(), ConditionParam::KernelRadius, &[1.5, 2.0]).is_err());
    }

    #[test]
    fn empty_roi() {
        let (img, _) = phantom();
        let mask = Array3::from_elem((7, 8, 9), false);
        assert!(voxel_features(&img, &mask, &ExtractionParams::default()).is_err());
    }

    #[test]
    fn per_label_auto_bin_width() {
        let (img, mask) = phantom();
        let labels = mask.mapv(|m| if m { 3u16 } else { 0 });
        let out = extract_label_features(&img, &labels, &[3], &ExtractionParams::default(), Some(&[2.0, 5.0, 10.0])).unwrap();
        let ids = out[&3].condition_ids().iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(ids.len(), 1);
        assert!(ids[0].starts_with("kernelRadius=2,binWidth="));
    }
}
