use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subjects in rows, raters in columns.
#[derive(Clone, Debug, PartialEq)]
pub struct RaterMatrix(Array2<f64>);

impl RaterMatrix {
    pub fn new(m: Array2<f64>) -> Result<Self> {
        let (n, j) = m.dim();
        if n < 2 || j < 2 {
            return Err(Error::InsufficientData(format!(
                "rater matrix needs at least 2 subjects and 2 raters, got {n}x{j}"
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("rater matrix has missing or non-finite entries".into()));
        }
        Ok(RaterMatrix(m))
    }

    /// One column per rater.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidParameter("rater columns differ in length".into()));
        }
        let m = Array2::from_shape_fn((n, columns.len()), |(i, j)| columns[j][i]);
        Self::new(m)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn subjects(&self) -> usize {
        self.0.nrows()
    }

    pub fn raters(&self) -> usize {
        self.0.ncols()
    }
}

fn moments(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows() as f64;
    let means: Vec<f64> = m.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
    let j = m.ncols();
    let cov = Array2::from_shape_fn((j, j), |(a, b)| {
        m.column(a)
            .iter()
            .zip(m.column(b).iter())
            .map(|(x, y)| (x - means[a]) * (y - means[b]))
            .sum::<f64>()
            / n
    });
    (means, cov)
}

/// Lin's concordance correlation coefficient of two raters.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    occc(&RaterMatrix::from_columns(&[x, y])?)
}

/// Overall concordance correlation coefficient.
///
/// Weighted mean of the pairwise CCCs with weights
/// var_j + var_k + (mean_j - mean_k)^2, i.e.
/// sum(2 cov_jk) / sum(var_j + var_k + (mean_j - mean_k)^2) over pairs.
pub fn occc(m: &RaterMatrix) -> Result<f64> {
    let (means, cov) = moments(&m.0);
    let j = m.raters();
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..j {
        for b in a + 1..j {
            num += 2.0 * cov[[a, b]];
            den += cov[[a, a]] + cov[[b, b]] + (means[a] - means[b]).powi(2);
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("OCCC undefined: raters are constant and equal".into()));
    }
    Ok(num / den)
}

/// Shrout-Fleiss intra-class correlation forms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IccForm {
    #[serde(rename = "1,1")]
    Icc1_1,
    #[default]
    #[serde(rename = "2,1")]
    Icc2_1,
    #[serde(rename = "3,1")]
    Icc3_1,
    #[serde(rename = "1,k")]
    Icc1K,
    #[serde(rename = "2,k")]
    Icc2K,
    #[serde(rename = "3,k")]
    Icc3K,
}

impl fmt::Display for IccForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IccForm::Icc1_1 => "1,1",
            IccForm::Icc2_1 => "2,1",
            IccForm::Icc3_1 => "3,1",
            IccForm::Icc1K => "1,k",
            IccForm::Icc2K => "2,k",
            IccForm::Icc3K => "3,k",
        })
    }
}

impl FromStr for IccForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1,1" => IccForm::Icc1_1,
            "2,1" => IccForm::Icc2_1,
            "3,1" => IccForm::Icc3_1,
            "1,k" => IccForm::Icc1K,
            "2,k" => IccForm::Icc2K,
            "3,k" => IccForm::Icc3K,
            _ => return Err(Error::InvalidParameter(format!("unknown ICC form '{s}'"))),
        })
    }
}

/// Two-way ANOVA mean squares of a rater matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnovaMeanSquares {
    /// between subjects
    pub msr: f64,
    /// between raters
    pub msc: f64,
    /// residual
    pub mse: f64,
    /// within subjects
    pub msw: f64,
}

pub fn anova_mean_squares(m: &RaterMatrix) -> AnovaMeanSquares {
    let x = &m.0;
    let (n, k) = (m.subjects() as f64, m.raters() as f64);
    let grand = x.sum() / (n * k);
    let row_means: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.sum() / k).collect();
    let col_means: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
    let ssr = k * row_means.iter().map(|r| (r - grand).powi(2)).sum::<f64>();
    let ssc = n * col_means.iter().map(|c| (c - grand).powi(2)).sum::<f64>();
    let sse: f64 = x
        .indexed_iter()
        .map(|((i, j), v)| (v - row_means[i] - col_means[j] + grand).powi(2))
        .sum();
    AnovaMeanSquares {
        msr: ssr / (n - 1.0),
        msc: ssc / (k - 1.0),
        mse: sse / ((n - 1.0) * (k - 1.0)),
        msw: (ssc + sse) / (n * (k - 1.0)),
    }
}

/// Intra-class correlation coefficient.
pub fn icc(m: &RaterMatrix, form: IccForm) -> Result<f64> {
    let ms = anova_mean_squares(m);
    if !(ms.msr > 0.0) {
        return Err(Error::Degenerate("ICC undefined: no variation between subjects".into()));
    }
    let x = &m.0;
    if x.axis_iter(Axis(0)).all(|r| r.iter().all(|v| *v == r[0])) {
        return Ok(1.0);
    }
    let (n, k) = (m.subjects() as f64, m.raters() as f64);
    let AnovaMeanSquares { msr, msc, mse, msw } = ms;
    let (num, den) = match form {
        IccForm::Icc1_1 => (msr - msw, msr + (k - 1.0) * msw),
        IccForm::Icc2_1 => (msr - mse, msr + (k - 1.0) * mse + k * (msc - mse) / n),
        IccForm::Icc3_1 => (msr - mse, msr + (k - 1.0) * mse),
        IccForm::Icc1K => (msr - msw, msr),
        IccForm::Icc2K => (msr - mse, msr + (msc - mse) / n),
        IccForm::Icc3K => (msr - mse, msr),
    };
    if den == 0.0 {
        return Err(Error::Degenerate("ICC denominator is zero".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_raters() {
        let col = [1.0, 3.0, 2.0, 7.0, 5.5];
        let m = RaterMatrix::from_columns(&[&col, &col, &col]).unwrap();
        assert_eq!(occc(&m).unwrap(), 1.0);
        assert_eq!(icc(&m, IccForm::Icc2_1).unwrap(), 1.0);
    }

    #[test]
    fn pairwise_ccc_oracle() {
        let x = [2.0, 4.0, 6.0, 9.0];
        let y = [3.0, 4.0, 8.0, 8.0];
        let mx = x.iter().sum::<f64>() / 4.0;
        let my = y.iter().sum::<f64>() / 4.0;
        let vx = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / 4.0;
        let vy = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / 4.0;
        let cxy = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / 4.0;
        let oracle = 2.0 * cxy / (vx + vy + (mx - my).powi(2));
        assert!((ccc(&x, &y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn shifted_rater() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 3.0, 4.0, 5.0];
        // var = 1.25 each, cov = 1.25, shift 1: 2.5 / (2.5 + 1)
        assert!((ccc(&x, &y).unwrap() - 2.5 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn icc_textbook_example() {
        // Shrout and Fleiss (1979) Table 2: 6 targets, 4 judges
        let m = RaterMatrix::new(array![
            [9.0, 2.0, 5.0, 8.0],
            [6.0, 1.0, 3.0, 2.0],
            [8.0, 4.0, 6.0, 8.0],
            [7.0, 1.0, 2.0, 6.0],
            [10.0, 5.0, 6.0, 9.0],
            [6.0, 2.0, 4.0, 7.0]
        ])
        .unwrap();
        let expect = [
            (IccForm::Icc1_1, 0.17),
            (IccForm::Icc2_1, 0.29),
            (IccForm::Icc3_1, 0.71),
            (IccForm::Icc1K, 0.44),
            (IccForm::Icc2K, 0.62),
            (IccForm::Icc3K, 0.91),
        ];
        for (form, v) in expect {
            assert!((icc(&m, form).unwrap() - v).abs() < 0.005, "{form}");
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(RaterMatrix::new(Array2::zeros((1, 3))).is_err());
        assert!(RaterMatrix::new(array![[1.0, f64::NAN], [2.0, 3.0]]).is_err());
        let flat = RaterMatrix::new(Array2::from_elem((4, 2), 3.0)).unwrap();
        assert!(occc(&flat).is_err());
        assert!(icc(&flat, IccForm::Icc2_1).is_err());
        assert_eq!("3,k".parse::<IccForm>().unwrap(), IccForm::Icc3K);
    }
}
