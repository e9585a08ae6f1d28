use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    /// Population standard deviation; 0 marks a constant column.
    pub std: f64,
}

/// Column statistics fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub columns: Vec<ColumnStats>,
}

impl Standardizer {
    pub fn fit(train: &FeatureMatrix) -> Result<Standardizer> {
        if train.n() == 0 {
            return Err(Error::Data("standardize: empty training matrix".into()));
        }
        let n = train.n() as f64;
        let columns = (0..train.m())
            .map(|j| {
                let col = train.column(j);
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                let std = if std <= 1e-12 * (1.0 + mean.abs()) { 0.0 } else { std };
                ColumnStats {
                    name: train.feature_names()[j].clone(),
                    mean,
                    std,
                }
            })
            .collect();
        Ok(Standardizer { columns })
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Z-score with the fitted statistics; constant columns become 0.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let names = self.names();
        if m.feature_names() != names.as_slice() {
            return Err(Error::schema_diff(&names, m.feature_names()));
        }
        let k = self.columns.len();
        let mut values = m.values().to_vec();
        for (idx, v) in values.iter_mut().enumerate() {
            let c = &self.columns[idx % k];
            *v = if c.std == 0.0 { 0.0 } else { (*v - c.mean) / c.std };
        }
        FeatureMatrix::new(m.instance_ids().to_vec(), names, values)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Standardizer> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Fit on `train`, transform both matrices.
pub fn standardize(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
) -> Result<(FeatureMatrix, FeatureMatrix, Standardizer)> {
    let s = Standardizer::fit(train)?;
    Ok((s.apply(train)?, s.apply(test)?, s))
}
