use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Ordinary least squares y ≈ slope·x + intercept on at least three points.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(LabError::ConfigError("fit inputs differ in length".into()));
    }
    if x.len() < 3 {
        return Err(LabError::ConfigError(format!(
            "a slope fit needs at least 3 scales, got {}",
            x.len()
        )));
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::ConfigError("scales must differ".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(LineFit {
        slope,
        intercept,
        residual,
    })
}

/// OLS on (log₂ x, log₂ y).
pub fn log2_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    if ly.iter().any(|v| !v.is_finite()) {
        return Err(LabError::ConfigError("log fit of non-positive data".into()));
    }
    ols(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = ols(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!(
            (f.slope - 2.0).abs() < 1e-14
                && (f.intercept - 1.0).abs() < 1e-14
                && f.residual < 1e-14
        );
    }

    #[test]
    fn too_few_points() {
        assert!(ols(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
