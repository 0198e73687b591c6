use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::descriptive::{check_sample, excess_kurtosis, skewness, variance};
use super::hypothesis::{
    f_test, levene_test, mann_whitney_u, paired_t_test, student_t_test, welch_t_test, wilcoxon_signed_rank,
    Alternative, LeveneCenter,
};
use super::normality::{normality_test, MIN_NORMALITY_N};
use crate::error::{Error, Result};

pub const T_TEST: &str = "t-test";
pub const WELCH_T_TEST: &str = "Welch t-test";
pub const PAIRED_T_TEST: &str = "paired t-test";
pub const WILCOXON: &str = "Wilcoxon signed-rank";
pub const MANN_WHITNEY: &str = "Mann-Whitney U";
pub const F_TEST: &str = "F-test";
pub const LEVENE: &str = "Levene";
pub const BROWN_FORSYTHE: &str = "Brown-Forsythe";
pub const TRIMMED_BROWN_FORSYTHE: &str = "trimmed Brown-Forsythe";

/// Thresholds of the automatic test selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoTestOptions {
    /// significance level of the normality and variance pre-checks
    pub alpha_norm: f64,
    /// |skewness| above which the median-centred test is used
    pub skew_threshold: f64,
    /// excess kurtosis above which the trimmed test is used
    pub kurtosis_threshold: f64,
    /// proportion cut from each end for the trimmed test
    pub trim: f64,
}

impl Default for AutoTestOptions {
    fn default() -> Self {
        AutoTestOptions {
            alpha_norm: 0.05,
            skew_threshold: 1.0,
            kurtosis_threshold: 3.0,
            trim: 0.1,
        }
    }
}

impl AutoTestOptions {
    fn validate(&self) -> Result<()> {
        if !(self.alpha_norm > 0.0 && self.alpha_norm < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha_norm {} outside (0, 1)", self.alpha_norm)));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(Error::InvalidParameter(format!("trim {} outside [0, 0.5)", self.trim)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// p-value of every test that was run, keyed by test name
    pub p_values: BTreeMap<String, f64>,
    pub chosen_mean_test: String,
    pub chosen_variance_test: Option<String>,
    pub alternative: Alternative,
    /// normality p-value per group, `None` when the group is too small
    pub normality: [Option<f64>; 2],
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn mean_p(&self) -> f64 {
        self.p_values[&self.chosen_mean_test]
    }

    pub fn variance_p(&self) -> Option<f64> {
        self.chosen_variance_test.as_ref().map(|t| self.p_values[t])
    }
}

fn normality_p(x: &[f64], label: &str, notes: &mut Vec<String>) -> Result<Option<f64>> {
    if x.len() < MIN_NORMALITY_N {
        notes.push(format!(
            "{label}: {} values, normality not tested (needs {MIN_NORMALITY_N})",
            x.len()
        ));
        return Ok(None);
    }
    match normality_test(x) {
        Ok(r) => Ok(Some(r.p_value)),
        Err(Error::Degenerate(m)) => {
            notes.push(format!("{label}: {m}"));
            Ok(Some(0.0))
        }
        Err(e) => Err(e),
    }
}

fn both_normal(p: &[Option<f64>; 2], alpha: f64) -> bool {
    p.iter().all(|v| v.is_some_and(|p| p > alpha))
}

/// Variance test picked from the shape of the data.
///
/// Normal groups use the F-test. Otherwise excess kurtosis above the
/// threshold in either group selects the trimmed Brown-Forsythe test,
/// |skewness| above its threshold the Brown-Forsythe test, and the
/// mean-centred Levene test covers the remaining mild deviations.
pub fn variance_test_auto(a: &[f64], b: &[f64], opts: &AutoTestOptions) -> Result<(String, f64)> {
    let mut notes = Vec::new();
    let normality = [normality_p(a, "a", &mut notes)?, normality_p(b, "b", &mut notes)?];
    variance_test_with(a, b, opts, &normality)
}

fn variance_test_with(a: &[f64], b: &[f64], opts: &AutoTestOptions, normality: &[Option<f64>; 2]) -> Result<(String, f64)> {
    opts.validate()?;
    check_sample(a, 2, "variance test")?;
    check_sample(b, 2, "variance test")?;
    if variance(a, 1) == 0.0 && variance(b, 1) == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    if both_normal(normality, opts.alpha_norm) {
        return Ok((F_TEST.into(), f_test(a, b, Alternative::TwoSided)?.p_value));
    }
    let kurt = excess_kurtosis(a).max(excess_kurtosis(b));
    let skew = skewness(a).abs().max(skewness(b).abs());
    let (name, center) = if kurt > opts.kurtosis_threshold {
        (TRIMMED_BROWN_FORSYTHE, LeveneCenter::Trimmed(opts.trim))
    } else if skew > opts.skew_threshold {
        (BROWN_FORSYTHE, LeveneCenter::Median)
    } else {
        (LEVENE, LeveneCenter::Mean)
    };
    Ok((name.into(), levene_test(&[a, b], center)?.p_value))
}

/// Compare two groups, choosing the test from normality and variance checks.
///
/// Both groups normal: paired data use the paired t-test, unpaired data the
/// regular t-test when the variance check does not reject equality and
/// Welch's test when it does. Otherwise paired data use the Wilcoxon
/// signed-rank test and unpaired data the Mann-Whitney U test. Groups
/// smaller than the normality minimum are treated as non-normal.
pub fn ttest_with_auto_checks(
    a: &[f64],
    b: &[f64],
    paired: bool,
    alternative: Alternative,
    opts: &AutoTestOptions,
    include_variance: bool,
) -> Result<TestReport> {
    opts.validate()?;
    check_sample(a, 2, "group a")?;
    check_sample(b, 2, "group b")?;
    if paired && a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![a.len()],
            found: vec![b.len()],
        });
    }
    let mut notes = Vec::new();
    let normality = [normality_p(a, "a", &mut notes)?, normality_p(b, "b", &mut notes)?];
    let normal = both_normal(&normality, opts.alpha_norm);
    let mut p_values = BTreeMap::new();
    let mut chosen_variance_test = None;
    if include_variance || (normal && !paired) {
        match variance_test_with(a, b, opts, &normality) {
            Ok((name, p)) => {
                p_values.insert(name.clone(), p);
                chosen_variance_test = Some(name);
            }
            Err(Error::Degenerate(m)) => notes.push(format!("variance test skipped: {m}")),
            Err(e) => return Err(e),
        }
    }
    let (name, result) = match (normal, paired) {
        (true, true) => (PAIRED_T_TEST, paired_t_test(a, b, alternative)?),
        (true, false) => {
            let equal = chosen_variance_test
                .as_ref()
                .map(|t| p_values[t] > opts.alpha_norm)
                .unwrap_or(true);
            if equal {
                (T_TEST, student_t_test(a, b, alternative)?)
            } else {
                (WELCH_T_TEST, welch_t_test(a, b, alternative)?)
            }
        }
        (false, true) => (WILCOXON, wilcoxon_signed_rank(a, b, alternative)?),
        (false, false) => (MANN_WHITNEY, mann_whitney_u(a, b, alternative)?),
    };
    p_values.insert(name.to_string(), result.p_value);
    Ok(TestReport {
        p_values,
        chosen_mean_test: name.to_string(),
        chosen_variance_test,
        alternative,
        normality,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, Normal};

    fn normal(seed: u64, n: usize, mu: f64, sd: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, sd).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn exponential(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Exp::new(1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn normal_same_mean_picks_t_test() {
        let r = ttest_with_auto_checks(
            &normal(1, 60, 0.0, 1.0),
            &normal(2, 60, 0.0, 1.0),
            false,
            Alternative::TwoSided,
            &AutoTestOptions::default(),
            true,
        )
        .unwrap();
        assert_eq!(r.chosen_mean_test, T_TEST);
        assert_eq!(r.chosen_variance_test.as_deref(), Some(F_TEST));
        assert!(r.mean_p() > 0.05);
    }

    #[test]
    fn skewed_group_picks_mann_whitney() {
        let r = ttest_with_auto_checks(
            &normal(3, 80, 1.0, 1.0),
            &exponential(4, 80),
            false,
            Alternative::TwoSided,
            &AutoTestOptions::default(),
            false,
        )
        .unwrap();
        assert_eq!(r.chosen_mean_test, MANN_WHITNEY);
        assert!(r.chosen_variance_test.is_none());
    }

    #[test]
    fn paired_normal_picks_paired_t() {
        let a = normal(5, 50, 10.0, 2.0);
        let noise = normal(6, 50, 0.0, 0.1);
        let b: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| x + e).collect();
        let r = ttest_with_auto_checks(&a, &b, true, Alternative::TwoSided, &AutoTestOptions::default(), false).unwrap();
        assert_eq!(r.chosen_mean_test, PAIRED_T_TEST);
    }

    #[test]
    fn unequal_variances_pick_welch() {
        let r = ttest_with_auto_checks(
            &normal(7, 100, 0.0, 1.0),
            &normal(8, 100, 0.0, 4.0),
            false,
            Alternative::TwoSided,
            &AutoTestOptions::default(),
            false,
        )
        .unwrap();
        assert_eq!(r.chosen_mean_test, WELCH_T_TEST);
    }

    #[test]
    fn small_groups_fall_through() {
        let r = ttest_with_auto_checks(
            &[1.0, 2.0, 3.0, 4.0],
            &[2.0, 3.0, 4.0, 5.0],
            true,
            Alternative::Less,
            &AutoTestOptions::default(),
            false,
        )
        .unwrap();
        assert_eq!(r.chosen_mean_test, WILCOXON);
        assert_eq!(r.normality, [None, None]);
        assert_eq!(r.notes.len(), 2);
    }

    #[test]
    fn variance_ladder() {
        let o = AutoTestOptions::default();
        assert_eq!(variance_test_auto(&normal(9, 60, 0.0, 1.0), &normal(10, 60, 0.0, 1.0), &o).unwrap().0, F_TEST);
        assert_eq!(variance_test_auto(&exponential(11, 200), &exponential(12, 200), &o).unwrap().0, BROWN_FORSYTHE);
        let heavy: Vec<f64> = normal(13, 200, 0.0, 1.0).iter().map(|v| v * v * v).collect();
        assert_eq!(variance_test_auto(&heavy, &normal(14, 200, 0.0, 1.0), &o).unwrap().0, TRIMMED_BROWN_FORSYTHE);
        let bimodal: Vec<f64> = (0..60).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 } + 0.01 * i as f64).collect();
        assert_eq!(variance_test_auto(&bimodal, &bimodal, &o).unwrap(), (LEVENE.to_string(), 1.0));
        assert!(matches!(variance_test_auto(&[1.0; 5], &[2.0; 5], &o), Err(Error::Degenerate(_))));
    }

    #[test]
    fn paired_length_checked() {
        assert!(ttest_with_auto_checks(&[1.0, 2.0, 3.0], &[1.0, 2.0], true, Alternative::TwoSided, &AutoTestOptions::default(), false).is_err());
    }
}
