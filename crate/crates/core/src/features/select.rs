use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Score {
    pub feature: String,
    pub statistic: f64,
    pub p_value: f64,
    /// All-0 or all-1 column.
    pub degenerate: bool,
}

/// Pearson chi-squared statistic of the 2x2 table of a binary feature against
/// binary labels, one degree of freedom, no continuity correction.
/// Degenerate columns score 0.
pub fn chi2_statistic(column: &[f64], labels: &[u8]) -> f64 {
    let (mut a, mut b, mut c, mut d) = (0u128, 0u128, 0u128, 0u128);
    for (&x, &y) in column.iter().zip(labels) {
        match (x != 0.0, y == 1) {
            (true, true) => a += 1,
            (true, false) => b += 1,
            (false, true) => c += 1,
            (false, false) => d += 1,
        }
    }
    let den = (a + b) * (c + d) * (a + c) * (b + d);
    if den == 0 {
        return 0.0;
    }
    let n = a + b + c + d;
    let diff = (a * d).abs_diff(b * c);
    // Integer numerator and denominator keep equal ratios bit-identical.
    (n * diff * diff) as f64 / den as f64
}

fn check_inputs(features: &FeatureMatrix, labels: &[u8]) -> Result<()> {
    if labels.len() != features.n() {
        return Err(Error::Data(format!(
            "chi2: {} labels for {} instances",
            labels.len(),
            features.n()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Data("chi2: labels must be 0/1".into()));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Data("chi2: both classes must be present".into()));
    }
    if features.values().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data("chi2: feature columns must be binary".into()));
    }
    Ok(())
}

/// Score every column against the labels.
pub fn chi2_scores(features: &FeatureMatrix, labels: &[u8]) -> Result<Vec<Chi2Score>> {
    check_inputs(features, labels)?;
    let dist = ChiSquared::new(1.0).expect("valid dof");
    Ok((0..features.m())
        .map(|j| {
            let col = features.column(j);
            let ones = col.iter().filter(|&&v| v != 0.0).count();
            let statistic = chi2_statistic(&col, labels);
            Chi2Score {
                feature: features.feature_names()[j].clone(),
                statistic,
                p_value: dist.sf(statistic),
                degenerate: ones == 0 || ones == col.len(),
            }
        })
        .collect())
}

/// Keep the `top_k` columns with the largest statistic. Ties go to the
/// lexicographically smaller name; degenerate columns rank after every
/// non-degenerate one. Selected columns keep their original order.
pub fn chi2_select(
    features: &FeatureMatrix,
    labels: &[u8],
    top_k: usize,
) -> Result<(FeatureMatrix, Vec<Chi2Score>)> {
    let mut scores = chi2_scores(features, labels)?;
    scores.sort_by(|x, y| {
        x.degenerate
            .cmp(&y.degenerate)
            .then_with(|| y.statistic.partial_cmp(&x.statistic).unwrap_or(Ordering::Equal))
            .then_with(|| x.feature.cmp(&y.feature))
    });
    scores.truncate(top_k);
    let chosen: std::collections::HashSet<&str> = scores.iter().map(|s| s.feature.as_str()).collect();
    let names: Vec<String> = features
        .feature_names()
        .iter()
        .filter(|n| chosen.contains(n.as_str()))
        .cloned()
        .collect();
    Ok((features.select_columns(&names)?, scores))
}
