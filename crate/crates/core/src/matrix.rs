use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major design matrix with named columns and identified rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    instance_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(instance_ids: Vec<String>, feature_names: Vec<String>, values: Vec<f64>) -> Result<FeatureMatrix> {
        if values.len() != instance_ids.len() * feature_names.len() {
            return Err(Error::Data(format!(
                "matrix: {} values for {}x{} shape",
                values.len(),
                instance_ids.len(),
                feature_names.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Data(format!("matrix: duplicate feature name `{dup}`")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("matrix: non-finite value".into()));
        }
        Ok(FeatureMatrix {
            instance_ids,
            feature_names,
            values,
        })
    }

    pub fn from_rows(instance_ids: Vec<String>, feature_names: Vec<String>, rows: &[Vec<f64>]) -> Result<FeatureMatrix> {
        let m = feature_names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::Data(format!("matrix: row {bad} has {} values, expected {m}", rows[bad].len())));
        }
        FeatureMatrix::new(instance_ids, feature_names, rows.concat())
    }

    /// `n x 0` matrix carrying only instance ids.
    pub fn empty(instance_ids: Vec<String>) -> FeatureMatrix {
        FeatureMatrix {
            instance_ids,
            feature_names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn m(&self) -> usize {
        self.feature_names.len()
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Side-by-side concatenation; both matrices must describe the same instances.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.instance_ids != other.instance_ids {
            return Err(Error::Data("hstack: instance ids differ".into()));
        }
        let mut names = self.feature_names.clone();
        names.extend(other.feature_names.iter().cloned());
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for i in 0..self.n() {
            values.extend_from_slice(self.row(i));
            values.extend_from_slice(other.row(i));
        }
        FeatureMatrix::new(self.instance_ids.clone(), names, values)
    }

    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::schema_diff(names, &self.feature_names))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(self.n() * idx.len());
        for i in 0..self.n() {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        FeatureMatrix::new(self.instance_ids.clone(), names.to_vec(), values)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.m());
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            instance_ids: rows.iter().map(|&i| self.instance_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values,
        }
    }

    /// Rows reordered to follow `ids`; every id must be present.
    pub fn select_ids(&self, ids: &[String]) -> Result<FeatureMatrix> {
        let pos: std::collections::HashMap<&str, usize> =
            self.instance_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows = ids
            .iter()
            .map(|id| {
                pos.get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("instance `{id}` not found")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_rows(&rows))
    }

    /// CSV with `instance_id` followed by one column per feature.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["instance_id".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.instance_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        if !path.is_file() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.first().map(String::as_str) != Some("instance_id") {
            return Err(Error::Header {
                table: path.display().to_string(),
                expected: "instance_id,<features...>".into(),
                found: header.join(","),
            });
        }
        let names = header[1..].to_vec();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Data(format!("{}: ragged row", path.display())));
            }
            ids.push(rec[0].to_string());
            for v in rec.iter().skip(1) {
                values.push(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Data(format!("{}: non-numeric cell `{v}`", path.display())))?,
                );
            }
        }
        FeatureMatrix::new(ids, names, values)
    }
}
