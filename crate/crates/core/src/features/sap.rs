use serde::{Deserialize, Serialize};

use super::stack::FeatureMapStack;
use crate::error::{Error, Result};

/// Scale by 1/ln(N), then z-score with the population standard deviation.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 values, got {n}")));
    }
    let scale = (n as f64).ln();
    let scaled: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let mean = scaled.iter().sum::<f64>() / n as f64;
    let sd = (scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let magnitude = scaled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sd > 1e-12 * magnitude) || !sd.is_finite() {
        return Err(Error::Degenerate("feature vector has zero variance".into()));
    }
    Ok(scaled.iter().map(|v| (v - mean) / sd).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SapResult {
    pub feature: String,
    pub subset: Vec<String>,
    pub pooled: Vec<f64>,
}

/// Subset average pooling of one feature across the conditions in `subset`.
///
/// Each condition's vector is standardized; the standardized vectors are
/// centred and scaled by the mean and standard deviation of all their
/// values together, then averaged voxel by voxel.
pub fn sap_pool(stack: &FeatureMapStack, feature: &str, subset: &[&str]) -> Result<SapResult> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("empty condition subset".into()));
    }
    stack.validate()?;
    let n = stack.n();
    let mut z = Vec::with_capacity(subset.len());
    for c in subset {
        let x = stack
            .feature(c, feature)
            .ok_or_else(|| Error::InvalidParameter(format!("no feature '{feature}' under condition '{c}'")))?;
        z.push(standardize(x).map_err(|e| match e {
            Error::Degenerate(m) => Error::Degenerate(format!("{feature} under {c}: {m}")),
            other => other,
        })?);
    }
    let total = (n * z.len()) as f64;
    let zbar = z.iter().flatten().sum::<f64>() / total;
    let sigma = (z.iter().flatten().map(|v| (v - zbar).powi(2)).sum::<f64>() / total).sqrt();
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("pooled values have zero spread".into()));
    }
    let k = z.len() as f64;
    let pooled = (0..n)
        .map(|i| z.iter().map(|zi| (zi[i] - zbar) / sigma).sum::<f64>() / k)
        .collect();
    Ok(SapResult {
        feature: feature.to_string(),
        subset: subset.iter().map(|s| s.to_string()).collect(),
        pooled,
    })
}

/// All subsets of `items` with exactly `k` elements, in lexicographic order.
pub fn combinations<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    fn rec<T: Clone>(items: &[T], k: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i].clone());
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= items.len() {
        rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    }
    out
}
