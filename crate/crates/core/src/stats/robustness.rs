use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::agreement::{occc, RaterMatrix};
use super::auto::{ttest_with_auto_checks, AutoTestOptions, TestReport};
use super::hypothesis::Alternative;
use crate::error::{Error, Result};
use crate::features::{combinations, sap_pool, standardize, FeatureMapStack};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessMode {
    /// raw feature vectors of each condition
    Baseline,
    /// per-condition standardized vectors
    Standardized,
    /// pooled vectors of every condition subset
    Sap,
}

impl fmt::Display for RobustnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RobustnessMode::Baseline => "baseline",
            RobustnessMode::Standardized => "standardized",
            RobustnessMode::Sap => "sap",
        })
    }
}

impl FromStr for RobustnessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(RobustnessMode::Baseline),
            "standardized" => Ok(RobustnessMode::Standardized),
            "sap" => Ok(RobustnessMode::Sap),
            _ => Err(Error::InvalidParameter(format!("unknown robustness mode '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessOptions {
    /// subset size for the sap mode
    pub n_components: usize,
    /// compare each feature's OCCC against the baseline
    pub do_ttest: bool,
    pub test_options: AutoTestOptions,
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        RobustnessOptions {
            n_components: 2,
            do_ttest: false,
            test_options: AutoTestOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub feature: String,
    pub mode: RobustnessMode,
    /// condition ids acting as raters; subsets are joined by `+` and
    /// separated by `|`
    pub subset: String,
    pub occc: f64,
    pub p_median: Option<f64>,
    pub p_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub mode: RobustnessMode,
    pub rows: Vec<RobustnessRow>,
    /// condition subsets acting as raters, one per rater
    pub subsets: Vec<Vec<String>>,
    /// features left out, with the reason
    pub skipped: Vec<(String, String)>,
    /// mode OCCCs against baseline OCCCs, paired by feature
    pub comparison: Option<TestReport>,
}

fn raters(stack: &FeatureMapStack, feature: &str, mode: RobustnessMode, subsets: &[Vec<String>]) -> Result<Vec<Vec<f64>>> {
    subsets
        .iter()
        .map(|s| {
            let refs: Vec<&str> = s.iter().map(String::as_str).collect();
            match mode {
                RobustnessMode::Sap => Ok(sap_pool(stack, feature, &refs)?.pooled),
                _ => {
                    let x = stack
                        .feature(refs[0], feature)
                        .ok_or_else(|| Error::InvalidParameter(format!("missing feature '{feature}' under '{}'", refs[0])))?;
                    if mode == RobustnessMode::Standardized {
                        standardize(x)
                    } else {
                        Ok(x.to_vec())
                    }
                }
            }
        })
        .collect()
}

fn feature_occc(stack: &FeatureMapStack, feature: &str, mode: RobustnessMode, subsets: &[Vec<String>]) -> Result<f64> {
    let cols = raters(stack, feature, mode, subsets)?;
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    occc(&RaterMatrix::from_columns(&refs)?)
}

fn rater_subsets(stack: &FeatureMapStack, mode: RobustnessMode, n_components: usize) -> Result<Vec<Vec<String>>> {
    let conds: Vec<String> = stack.condition_ids().iter().map(|s| s.to_string()).collect();
    if conds.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "robustness needs at least 2 conditions, got {}",
            conds.len()
        )));
    }
    Ok(match mode {
        RobustnessMode::Sap => {
            if n_components == 0 || n_components > conds.len() {
                return Err(Error::InvalidParameter(format!(
                    "n_components {n_components} outside 1..={}",
                    conds.len()
                )));
            }
            combinations(&conds, n_components)
        }
        _ => conds.into_iter().map(|c| vec![c]).collect(),
    })
}

/// Agreement of each feature across extraction conditions.
///
/// The raters of the OCCC are the conditions (baseline, standardized) or
/// the pooled vectors of every `n_components`-sized condition subset
/// (sap). Features whose vectors are degenerate are skipped and listed.
pub fn eval_feature_robustness(
    stack: &FeatureMapStack,
    mode: RobustnessMode,
    opts: &RobustnessOptions,
) -> Result<RobustnessTable> {
    stack.validate()?;
    let subsets = rater_subsets(stack, mode, opts.n_components)?;
    let label = subsets.iter().map(|s| s.join("+")).collect::<Vec<_>>().join("|");
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut paired = (Vec::new(), Vec::new());
    let baseline_subsets = rater_subsets(stack, RobustnessMode::Baseline, 1)?;
    for feature in stack.feature_names() {
        let value = match feature_occc(stack, &feature, mode, &subsets) {
            Ok(v) => v,
            Err(Error::Degenerate(m)) => {
                log::info!("robustness: skipping {feature}: {m}");
                skipped.push((feature, m));
                continue;
            }
            Err(e) => return Err(e),
        };
        if opts.do_ttest && mode != RobustnessMode::Baseline {
            if let Ok(b) = feature_occc(stack, &feature, RobustnessMode::Baseline, &baseline_subsets) {
                paired.0.push(value);
                paired.1.push(b);
            }
        }
        rows.push(RobustnessRow {
            feature,
            mode,
            subset: label.clone(),
            occc: value,
            p_median: None,
            p_variance: None,
        });
    }
    let comparison = if paired.0.len() >= 2 {
        let r = ttest_with_auto_checks(&paired.0, &paired.1, true, Alternative::TwoSided, &opts.test_options, true)?;
        for row in &mut rows {
            row.p_median = Some(r.mean_p());
            row.p_variance = r.variance_p();
        }
        Some(r)
    } else {
        None
    };
    Ok(RobustnessTable {
        mode,
        rows,
        subsets,
        skipped,
        comparison,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with columns feature, mode, subset, occc, p_median, p_variance.
pub fn write_robustness_csv<W: Write>(rows: &[RobustnessRow], mut out: W) -> Result<()> {
    writeln!(out, "feature,mode,subset,occc,p_median,p_variance")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.feature,
            r.mode,
            r.subset,
            r.occc,
            opt(r.p_median),
            opt(r.p_variance)
        )?;
    }
    Ok(())
}
