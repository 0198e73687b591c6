use crate::error::{Error, Result};

/// Preset widths a data-driven bin width is snapped to.
pub const DEFAULT_TARGET_BIN_WIDTHS: [f64; 6] = [2.0, 5.0, 10.0, 20.0, 40.0, 50.0];

/// Histogram bin width from Doane's rule.
///
/// Follows numpy's `histogram_bin_edges(bins="doane")`: the bin count is
/// the ceiling of the ratio between the range and Doane's width, and the
/// returned width is the resulting edge spacing.
pub fn doane_bin_width(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("Doane's rule needs at least 3 values, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite value in bin width input".into()));
    }
    let nf = n as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let mean = values.iter().sum::<f64>() / nf;
    let sigma = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    if !(range > 0.0) || !(sigma > 0.0) {
        return Err(Error::Degenerate("constant input has no histogram bin width".into()));
    }
    let g1 = values.iter().map(|v| ((v - mean) / sigma).powi(3)).sum::<f64>() / nf;
    let sg1 = (6.0 * (nf - 2.0) / ((nf + 1.0) * (nf + 3.0))).sqrt();
    let width = range / (1.0 + nf.log2() + (1.0 + g1.abs() / sg1).log2());
    let bins = (range / width).ceil().max(1.0);
    Ok(range / bins)
}

/// Round to the nearest integer (ties to even), then snap to the closest
/// target; equally close targets resolve to the smaller one.
pub fn round_bin_width(raw: f64, targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no target bin widths".into()));
    }
    if !raw.is_finite() {
        return Err(Error::InvalidParameter(format!("bin width {raw} is not finite")));
    }
    let r = raw.round_ties_even();
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = sorted[0];
    for &t in &sorted[1..] {
        if (t - r).abs() < (best - r).abs() {
            best = t;
        }
    }
    Ok(best)
}

/// Doane width of `values` snapped to `targets`.
pub fn optimal_hist_bin_width(values: &[f64], targets: &[f64]) -> Result<f64> {
    round_bin_width(doane_bin_width(values)?, targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_examples() {
        let t = DEFAULT_TARGET_BIN_WIDTHS;
        assert_eq!(round_bin_width(2.3, &t).unwrap(), 2.0);
        assert_eq!(round_bin_width(16.8, &t).unwrap(), 20.0);
        assert_eq!(round_bin_width(15.0, &t).unwrap(), 10.0);
        assert_eq!(round_bin_width(0.1, &t).unwrap(), 2.0);
        assert_eq!(round_bin_width(500.0, &t).unwrap(), 50.0);
        assert_eq!(round_bin_width(7.5, &[5.0, 10.0]).unwrap(), 10.0);
        assert!(round_bin_width(3.0, &[]).is_err());
    }

    #[test]
    fn small_symmetric_sample() {
        // n = 5, symmetric so g1 = 0: 1 + log2(5) = 3.32 -> 4 bins over range 4
        let w = doane_bin_width(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(doane_bin_width(&[1.0, 2.0]), Err(Error::InsufficientData(_))));
        assert!(matches!(doane_bin_width(&[3.0; 10]), Err(Error::Degenerate(_))));
        assert!(doane_bin_width(&[1.0, f64::NAN, 2.0]).is_err());
    }
}
