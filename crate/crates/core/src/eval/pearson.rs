use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Sample correlation; `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` from the t distribution with n-2 degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    if r.abs() >= 1.0 {
        return Some(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some(2.0 * dist.sf(t.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub feature: String,
    pub r: Option<f64>,
    pub p_value: Option<f64>,
}

/// Correlation of every column with the binary outcome.
pub fn pearson_univariate(features: &FeatureMatrix, labels: &[u8]) -> Result<Vec<PearsonResult>> {
    if labels.len() != features.n() {
        return Err(Error::Data(format!(
            "pearson: {} labels for {} rows",
            labels.len(),
            features.n()
        )));
    }
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    Ok((0..features.m())
        .map(|j| {
            let r = pearson(&features.column(j), &y);
            PearsonResult {
                feature: features.feature_names()[j].clone(),
                r,
                p_value: r.and_then(|r| pearson_p_value(r, labels.len())),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverse() {
        let y = [0.0, 1.0, 1.0, 0.0, 1.0];
        let inv: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
        assert!((pearson(&y, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&inv, &y).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[2.0; 5], &y), None);
    }

    #[test]
    fn p_value_of_zero_correlation_is_one() {
        assert!((pearson_p_value(0.0, 20).unwrap() - 1.0).abs() < 1e-12);
    }
}
