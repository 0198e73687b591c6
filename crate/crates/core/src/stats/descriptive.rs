use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Variance with `ddof` delta degrees of freedom.
pub fn variance(x: &[f64], ddof: usize) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - ddof) as f64
}

pub fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn central_moment(x: &[f64], p: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(p)).sum::<f64>() / x.len() as f64
}

/// Biased sample skewness g1; 0 for constant data.
pub fn skewness(x: &[f64]) -> f64 {
    let m2 = central_moment(x, 2);
    if m2 > 0.0 {
        central_moment(x, 3) / m2.powf(1.5)
    } else {
        0.0
    }
}

/// Biased excess kurtosis g2; 0 for constant data.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let m2 = central_moment(x, 2);
    if m2 > 0.0 {
        central_moment(x, 4) / (m2 * m2) - 3.0
    } else {
        0.0
    }
}

/// Average ranks (1-based), ties share the mean of their positions.
pub fn rankdata(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sum of t^3 - t over tie groups.
pub fn tie_term(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Drop `floor(proportion * n)` values from each end of the sorted data.
pub fn trim_both(x: &[f64], proportion: f64) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let cut = (proportion * s.len() as f64).floor() as usize;
    if 2 * cut >= s.len() {
        return s;
    }
    s[cut..s.len() - cut].to_vec()
}

pub(crate) fn check_sample(x: &[f64], min: usize, what: &str) -> Result<()> {
    if x.len() < min {
        return Err(Error::InsufficientData(format!(
            "{what} needs at least {min} values, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what}: non-finite value")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(rankdata(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(tie_term(&[1.0, 1.0, 1.0, 2.0, 3.0, 3.0]), 24.0 + 6.0);
    }

    #[test]
    fn moments() {
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        assert_eq!(mean(&x), 4.0);
        assert_eq!(variance(&x, 0), 10.0);
        assert_eq!(variance(&x, 1), 12.5);
        assert_eq!(median(&x), 3.0);
        assert!((skewness(&x) - 36.0 / 10f64.powf(1.5)).abs() < 1e-12);
        assert!((excess_kurtosis(&x) - (2.788 - 3.0)).abs() < 1e-12);
        assert_eq!(skewness(&[2.0; 3]), 0.0);
    }

    #[test]
    fn trimming() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(trim_both(&x, 0.1), (1..9).map(f64::from).collect::<Vec<_>>());
        assert_eq!(trim_both(&x, 0.05).len(), 10);
    }
}
