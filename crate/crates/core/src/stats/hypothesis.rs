use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use super::descriptive::{check_sample, mean, median, rankdata, tie_term, trim_both, variance};
use crate::error::{Error, Result};

/// Alternative hypothesis, phrased for the first sample relative to the second.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
    Less,
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::TwoSided => "two-sided",
            Alternative::Greater => "greater",
            Alternative::Less => "less",
        })
    }
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            _ => Err(Error::InvalidParameter(format!(
                "alternative must be two-sided, greater or less, got '{s}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn p_from_cdf(stat: f64, cdf: impl Fn(f64) -> f64, sf: impl Fn(f64) -> f64, alt: Alternative) -> f64 {
    let p = match alt {
        Alternative::TwoSided => 2.0 * sf(stat.abs()),
        Alternative::Greater => sf(stat),
        Alternative::Less => cdf(stat),
    };
    p.clamp(0.0, 1.0)
}

fn t_result(diff: f64, se: f64, df: f64, alt: Alternative) -> Result<TestResult> {
    let statistic = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    if se == 0.0 && diff == 0.0 {
        return Ok(TestResult { statistic, p_value: 1.0 });
    }
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(TestResult {
        statistic,
        p_value: p_from_cdf(statistic, |x| t.cdf(x), |x| t.sf(x), alt),
    })
}

fn z_result(z: f64, alt: Alternative) -> TestResult {
    let n = std_normal();
    TestResult {
        statistic: z,
        p_value: p_from_cdf(z, |x| n.cdf(x), |x| n.sf(x), alt),
    }
}

/// Student's t-test with pooled variance.
pub fn student_t_test(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult> {
    check_sample(a, 2, "t-test")?;
    check_sample(b, 2, "t-test")?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let df = n1 + n2 - 2.0;
    let sp2 = ((n1 - 1.0) * variance(a, 1) + (n2 - 1.0) * variance(b, 1)) / df;
    t_result(mean(a) - mean(b), (sp2 * (1.0 / n1 + 1.0 / n2)).sqrt(), df, alt)
}

/// Welch's t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult> {
    check_sample(a, 2, "Welch t-test")?;
    check_sample(b, 2, "Welch t-test")?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (v1, v2) = (variance(a, 1) / n1, variance(b, 1) / n2);
    let df = if v1 + v2 > 0.0 {
        (v1 + v2).powi(2) / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0))
    } else {
        n1 + n2 - 2.0
    };
    t_result(mean(a) - mean(b), (v1 + v2).sqrt(), df, alt)
}

fn check_paired(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![a.len()],
            found: vec![b.len()],
        });
    }
    Ok(())
}

/// t-test on the paired differences a - b.
pub fn paired_t_test(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult> {
    check_paired(a, b)?;
    check_sample(a, 2, "paired t-test")?;
    check_sample(b, 2, "paired t-test")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    t_result(mean(&d), (variance(&d, 1) / n).sqrt(), n - 1.0, alt)
}

/// Wilcoxon signed-rank test on a - b.
///
/// Zero differences are dropped; the p-value uses the normal approximation
/// with tie correction and no continuity correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult> {
    check_paired(a, b)?;
    check_sample(a, 2, "Wilcoxon signed-rank test")?;
    check_sample(b, 2, "Wilcoxon signed-rank test")?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let n = d.len() as f64;
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = rankdata(&abs);
    let r_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let mu = n * (n + 1.0) / 4.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(&abs) / 48.0;
    if !(var > 0.0) {
        return Ok(TestResult {
            statistic: r_plus,
            p_value: 1.0,
        });
    }
    let z = z_result((r_plus - mu) / var.sqrt(), alt);
    Ok(TestResult {
        statistic: r_plus,
        p_value: z.p_value,
    })
}

/// Mann-Whitney U test, normal approximation with tie and continuity
/// correction. The statistic is U of the first sample.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult> {
    check_sample(a, 1, "Mann-Whitney U test")?;
    check_sample(b, 1, "Mann-Whitney U test")?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = rankdata(&all);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term(&all) / (n * (n - 1.0)));
    if !(var > 0.0) {
        return Ok(TestResult {
            statistic: u1,
            p_value: 1.0,
        });
    }
    let sd = var.sqrt();
    let norm = std_normal();
    let p = match alt {
        Alternative::TwoSided => 2.0 * norm.sf(((u1 - mu).abs() - 0.5) / sd),
        Alternative::Greater => norm.sf((u1 - mu - 0.5) / sd),
        Alternative::Less => norm.cdf((u1 - mu + 0.5) / sd),
    };
    Ok(TestResult {
        statistic: u1,
        p_value: p.clamp(0.0, 1.0),
    })
}

/// F-test for equal variances, statistic var(a) / var(b).
pub fn f_test(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult> {
    check_sample(a, 2, "F-test")?;
    check_sample(b, 2, "F-test")?;
    let (va, vb) = (variance(a, 1), variance(b, 1));
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let statistic = if vb > 0.0 { va / vb } else { f64::INFINITY };
    let f = FisherSnedecor::new(a.len() as f64 - 1.0, b.len() as f64 - 1.0)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (cdf, sf) = if statistic.is_finite() {
        (f.cdf(statistic), f.sf(statistic))
    } else {
        (1.0, 0.0)
    };
    let p = match alt {
        Alternative::TwoSided => 2.0 * cdf.min(sf),
        Alternative::Greater => sf,
        Alternative::Less => cdf,
    };
    Ok(TestResult {
        statistic,
        p_value: p.clamp(0.0, 1.0),
    })
}

/// Centre used by Levene-type tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeveneCenter {
    /// original Levene test
    Mean,
    /// Brown-Forsythe
    Median,
    /// Brown-Forsythe on samples trimmed by this proportion at each end
    Trimmed(f64),
}

/// Levene-type test for equal variances across groups.
pub fn levene_test(groups: &[&[f64]], center: LeveneCenter) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData("Levene test needs at least two groups".into()));
    }
    let samples: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            check_sample(g, 2, "Levene test")?;
            Ok(match center {
                LeveneCenter::Trimmed(p) => trim_both(g, p),
                _ => g.to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    let z: Vec<Vec<f64>> = samples
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Median => median(g),
                _ => mean(g),
            };
            g.iter().map(|v| (v - c).abs()).collect()
        })
        .collect();
    let k = z.len() as f64;
    let n_total: usize = z.iter().map(Vec::len).sum();
    let n = n_total as f64;
    let grand = z.iter().flatten().sum::<f64>() / n;
    let between: f64 = z.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let within: f64 = z
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    if within == 0.0 {
        if between == 0.0 {
            return Ok(TestResult {
                statistic: 0.0,
                p_value: 1.0,
            });
        }
        return Err(Error::Degenerate("Levene test with zero within-group spread".into()));
    }
    let w = (n - k) / (k - 1.0) * between / within;
    let f = FisherSnedecor::new(k - 1.0, n - k).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(TestResult {
        statistic: w,
        p_value: f.sf(w).clamp(0.0, 1.0),
    })
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_compare(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_sample(a, 1, "KS test")?;
    check_sample(b, 1, "KS test")?;
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] == v {
            i += 1;
        }
        while j < m && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n as f64 * m as f64 / (n + m) as f64).sqrt();
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(en * d),
    })
}
