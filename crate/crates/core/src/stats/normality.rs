use super::descriptive::{check_sample, excess_kurtosis, skewness};
use crate::error::{Error, Result};

/// Smallest sample the omnibus normality test accepts.
pub const MIN_NORMALITY_N: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalityResult {
    pub z_skew: f64,
    pub z_kurtosis: f64,
    /// K^2 = z_skew^2 + z_kurtosis^2
    pub statistic: f64,
    pub p_value: f64,
}

fn skew_z(g1: f64, n: f64) -> f64 {
    let y = g1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    delta * (y / alpha + ((y / alpha).powi(2) + 1.0).sqrt()).ln()
}

fn kurtosis_z(b2: f64, n: f64) -> f64 {
    let e = 3.0 * (n - 1.0) / (n + 1.0);
    let var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    let x = (b2 - e) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    (term1 - term2) / (2.0 / (9.0 * a)).sqrt()
}

/// D'Agostino and Pearson's omnibus normality test.
///
/// Skewness and kurtosis are transformed to approximately standard normal
/// scores; their squared sum is referred to a chi-square with 2 degrees of
/// freedom.
pub fn normality_test(x: &[f64]) -> Result<NormalityResult> {
    check_sample(x, MIN_NORMALITY_N, "normality test")?;
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.iter().all(|v| *v == m) {
        return Err(Error::Degenerate("normality test on constant data".into()));
    }
    let z_skew = skew_z(skewness(x), n);
    let z_kurtosis = kurtosis_z(excess_kurtosis(x) + 3.0, n);
    let statistic = z_skew * z_skew + z_kurtosis * z_kurtosis;
    // chi-square(2) survival function
    let p_value = if statistic.is_finite() { (-statistic / 2.0).exp().clamp(0.0, 1.0) } else { 0.0 };
    Ok(NormalityResult {
        z_skew,
        z_kurtosis,
        statistic,
        p_value,
    })
}
