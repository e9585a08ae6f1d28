use super::train::{fit_logistic, LogisticConfig};
use super::{ModelBody, ModelKind, TrainedModel};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::features::Standardizer;
use crate::matrix::FeatureMatrix;

/// Element-wise convex combination of aligned score vectors.
pub fn fuse_weighted_average(scores: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    if scores.len() != weights.len() || scores.is_empty() {
        return Err(Error::Data(format!(
            "fusion: {} score vectors for {} weights",
            scores.len(),
            weights.len()
        )));
    }
    let n = scores[0].len();
    if scores.iter().any(|s| s.len() != n) {
        return Err(Error::Data("fusion: score vectors differ in length".into()));
    }
    check_simplex(weights)?;
    Ok((0..n)
        .map(|i| scores.iter().zip(weights).map(|(s, w)| w * s[i]).sum())
        .collect())
}

fn check_simplex(weights: &[f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("fusion weights {weights:?} are not on the simplex")));
    }
    Ok(())
}

/// Weights proportional to each score's AUC against `labels`.
pub fn auc_weights(scores: &[&[f64]], labels: &[u8]) -> Result<Vec<f64>> {
    let aucs = scores
        .iter()
        .map(|s| auc(s, labels).ok_or_else(|| Error::Data("fusion weights need both classes".into())))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = aucs.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical("fusion: all component AUCs are zero".into()));
    }
    Ok(aucs.into_iter().map(|a| a / total).collect())
}

/// Named score columns as a matrix, e.g. `[("s0", lr), ("pce", s1)]`.
pub fn score_matrix(instance_ids: Vec<String>, columns: &[(&str, &[f64])]) -> Result<FeatureMatrix> {
    let n = instance_ids.len();
    if columns.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Data("score columns differ in length".into()));
    }
    let mut values = Vec::with_capacity(n * columns.len());
    for i in 0..n {
        values.extend(columns.iter().map(|(_, c)| c[i]));
    }
    FeatureMatrix::new(
        instance_ids,
        columns.iter().map(|(name, _)| name.to_string()).collect(),
        values,
    )
}

/// Decision-fusion model averaging the named score columns.
pub fn weighted_average_model(input_schema: Vec<String>, weights: Vec<f64>) -> Result<TrainedModel> {
    check_simplex(&weights)?;
    if input_schema.len() != weights.len() {
        return Err(Error::Config("one fusion weight per score column".into()));
    }
    Ok(TrainedModel {
        kind: ModelKind::DfWa,
        input_schema,
        uses_knowledge_input: false,
        preprocess: None,
        config: serde_json::json!({ "weights": weights }),
        body: ModelBody::WeightedAverage { weights },
        loss_trace: Vec::new(),
        seed: 0,
    })
}

/// Logistic meta-learner over score columns in [0,1].
pub fn train_meta_fusion(scores: &FeatureMatrix, labels: &[u8], cfg: &LogisticConfig) -> Result<TrainedModel> {
    if let Some(v) = scores.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Data(format!("meta fusion: score {v} outside [0,1]")));
    }
    let std = Standardizer::fit(scores)?;
    let (network, loss_trace) = fit_logistic(&std.apply(scores)?, labels, cfg)?;
    Ok(TrainedModel {
        kind: ModelKind::MetaFusion,
        input_schema: scores.feature_names().to_vec(),
        uses_knowledge_input: false,
        preprocess: Some(std),
        body: ModelBody::Network { network },
        loss_trace,
        seed: 0,
        config: serde_json::to_value(cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_weights_return_first_score() {
        let s0 = [0.2, 0.8, 0.33];
        let s1 = [0.6, 0.4, 0.9];
        assert_eq!(fuse_weighted_average(&[&s0, &s1], &[1.0, 0.0]).unwrap(), s0.to_vec());
    }

    #[test]
    fn half_half() {
        let f = fuse_weighted_average(&[&[0.2, 0.8], &[0.6, 0.4]], &[0.5, 0.5]).unwrap();
        assert!((f[0] - 0.4).abs() < 1e-15 && (f[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatch() {
        assert!(fuse_weighted_average(&[&[0.2, 0.8], &[0.6]], &[0.5, 0.5]).is_err());
        assert!(fuse_weighted_average(&[&[0.2], &[0.6]], &[0.7, 0.5]).is_err());
    }
}
