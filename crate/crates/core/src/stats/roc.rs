use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::descriptive::rankdata;
use crate::error::{Error, Result};

/// Classifier scores with binary ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct RocData {
    pub scores: Vec<f64>,
    pub truth: Vec<bool>,
}

impl RocData {
    pub fn new(scores: Vec<f64>, truth: Vec<bool>) -> Result<Self> {
        if scores.len() != truth.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![truth.len()],
                found: vec![scores.len()],
            });
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite score".into()));
        }
        let pos = truth.iter().filter(|t| **t).count();
        if pos == 0 || pos == truth.len() {
            return Err(Error::InsufficientData("ROC data needs both classes".into()));
        }
        Ok(RocData { scores, truth })
    }

    fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let pos = self.scores.iter().zip(&self.truth).filter(|(_, t)| **t).map(|(s, _)| *s).collect();
        let neg = self.scores.iter().zip(&self.truth).filter(|(_, t)| !**t).map(|(s, _)| *s).collect();
        (pos, neg)
    }
}

/// AUC and DeLong structural components.
struct Components {
    auc: f64,
    v10: Vec<f64>,
    v01: Vec<f64>,
}

fn components(r: &RocData) -> Components {
    let (x, y) = r.split();
    let (m, n) = (x.len() as f64, y.len() as f64);
    let all: Vec<f64> = x.iter().chain(&y).copied().collect();
    let rz = rankdata(&all);
    let rx = rankdata(&x);
    let ry = rankdata(&y);
    let v10: Vec<f64> = (0..x.len()).map(|i| (rz[i] - rx[i]) / n).collect();
    let v01: Vec<f64> = (0..y.len()).map(|j| 1.0 - (rz[x.len() + j] - ry[j]) / m).collect();
    // Mann-Whitney U of the positives; exact in half-integers
    let u = rz[..x.len()].iter().sum::<f64>() - m * (m + 1.0) / 2.0;
    let auc = u / (m * n);
    Components { auc, v10, v01 }
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

fn delong_var(c: &Components) -> f64 {
    let s10 = if c.v10.len() > 1 { cov(&c.v10, &c.v10) } else { 0.0 };
    let s01 = if c.v01.len() > 1 { cov(&c.v01, &c.v01) } else { 0.0 };
    s10 / c.v10.len() as f64 + s01 / c.v01.len() as f64
}

/// Area under the ROC curve, ties counted one half.
pub fn auc(r: &RocData) -> f64 {
    components(r).auc
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc1: f64,
    pub auc2: f64,
    pub z: f64,
    pub p_value: f64,
}

/// DeLong's test for the difference of two AUCs.
///
/// Paired curves must share the ground truth; their covariance enters the
/// variance of the difference. Unpaired curves are compared with the sum of
/// their variances.
pub fn delong_test(r1: &RocData, r2: &RocData, paired: bool) -> Result<DelongResult> {
    let c1 = components(r1);
    let c2 = components(r2);
    let mut var = delong_var(&c1) + delong_var(&c2);
    if paired {
        if r1.truth != r2.truth {
            return Err(Error::InvalidParameter("paired ROC curves need identical ground truth".into()));
        }
        let s10 = if c1.v10.len() > 1 { cov(&c1.v10, &c2.v10) } else { 0.0 };
        let s01 = if c1.v01.len() > 1 { cov(&c1.v01, &c2.v01) } else { 0.0 };
        var -= 2.0 * (s10 / c1.v10.len() as f64 + s01 / c1.v01.len() as f64);
    }
    let diff = c1.auc - c2.auc;
    let (z, p_value) = if var <= 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let z = diff / var.sqrt();
        let n = Normal::new(0.0, 1.0).expect("standard normal");
        (z, (2.0 * n.sf(z.abs())).clamp(0.0, 1.0))
    };
    Ok(DelongResult {
        auc1: c1.auc,
        auc2: c2.auc,
        z,
        p_value,
    })
}

/// Normal-approximation confidence interval of the AUC using the DeLong
/// variance, clipped to [0, 1].
pub fn auc_confidence_interval(r: &RocData, level: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidParameter(format!("confidence level {level} outside [0, 1)")));
    }
    let c = components(r);
    if level == 0.0 {
        return Ok((c.auc, c.auc));
    }
    let q = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0);
    let half = q * delong_var(&c).max(0.0).sqrt();
    Ok(((c.auc - half).max(0.0), (c.auc + half).min(1.0)))
}
