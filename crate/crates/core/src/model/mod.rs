//! The model zoo: logistic regression, dense networks with knowledge
//! injected at the input, in the objective, or through a teacher network,
//! and output-level fusion of scores.

mod fusion;
mod loss;
mod network;
mod optim;
mod train;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::matrix::FeatureMatrix;
use crate::pce::KnowledgeScoreVector;

pub use fusion::{auc_weights, fuse_weighted_average, score_matrix, train_meta_fusion, weighted_average_model};
pub use loss::{cross_entropy, loss_and_grad, loss_only, Objective, Rows, EPS};
pub use network::{sigmoid, Activation, ForwardCache, Network};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    fit_logistic, kenn_objective, logistic_loss_and_grad, student_objective, teacher_objective, train_logistic,
    train_logistic_k, train_mlp, train_tsnn, InjectionWeights, LogisticConfig, MlpConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lr,
    LrK,
    Nn,
    NnK,
    TsnnTeacher,
    TsnnStudent,
    Kenn,
    DfWa,
    MetaFusion,
}

impl ModelKind {
    /// The eight kinds of the comparison grid, in report order.
    pub const GRID: [ModelKind; 8] = [
        ModelKind::Lr,
        ModelKind::LrK,
        ModelKind::Nn,
        ModelKind::NnK,
        ModelKind::TsnnTeacher,
        ModelKind::TsnnStudent,
        ModelKind::Kenn,
        ModelKind::DfWa,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::LrK => "LR-K",
            ModelKind::Nn => "NN",
            ModelKind::NnK => "NN-K",
            ModelKind::TsnnTeacher => "TSNN-T",
            ModelKind::TsnnStudent => "TSNN-S",
            ModelKind::Kenn => "KENN",
            ModelKind::DfWa => "DF-WA",
            ModelKind::MetaFusion => "META",
        }
    }

    pub fn from_label(s: &str) -> Option<ModelKind> {
        let k = s.trim().to_ascii_uppercase().replace('_', "-");
        [ModelKind::MetaFusion]
            .into_iter()
            .chain(ModelKind::GRID)
            .find(|m| m.label() == k)
            .or(match k.as_str() {
                "TSNN-TEACHER" => Some(ModelKind::TsnnTeacher),
                "TSNN-STUDENT" => Some(ModelKind::TsnnStudent),
                "META-FUSION" => Some(ModelKind::MetaFusion),
                _ => None,
            })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelBody {
    Network { network: Network },
    /// Convex combination of the input columns.
    WeightedAverage { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    /// Column names the model consumes, knowledge columns last.
    pub input_schema: Vec<String>,
    pub uses_knowledge_input: bool,
    /// Z-scoring fitted on the training input; applied before the body.
    pub preprocess: Option<Standardizer>,
    pub body: ModelBody,
    /// Mean training loss per epoch (per iteration for full-batch fits).
    pub loss_trace: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl TrainedModel {
    pub fn network(&self) -> Option<&Network> {
        match &self.body {
            ModelBody::Network { network } => Some(network),
            ModelBody::WeightedAverage { .. } => None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        if !path.exists() {
            return Err(Error::MissingFile { path: path.to_path_buf() });
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Assemble the model's input from features and, for knowledge-input
/// kinds, the knowledge columns; check it against the training schema.
pub fn model_input(
    model: &TrainedModel,
    features: &FeatureMatrix,
    knowledge: Option<&KnowledgeScoreVector>,
) -> Result<FeatureMatrix> {
    let input = if model.uses_knowledge_input {
        let k = knowledge.ok_or_else(|| {
            Error::Data(format!("{} model needs knowledge scores at prediction time", model.kind))
        })?;
        features.hstack(k.matrix())?
    } else {
        features.clone()
    };
    if input.feature_names() != model.input_schema.as_slice() {
        return Err(Error::schema_diff(&model.input_schema, input.feature_names()));
    }
    Ok(input)
}

/// Probabilities for every row. Dropout is never applied here.
pub fn predict(
    model: &TrainedModel,
    features: &FeatureMatrix,
    knowledge: Option<&KnowledgeScoreVector>,
) -> Result<Vec<f64>> {
    let input = model_input(model, features, knowledge)?;
    let input = match &model.preprocess {
        Some(s) => s.apply(&input)?,
        None => input,
    };
    let out: Vec<f64> = match &model.body {
        ModelBody::Network { network } => {
            if network.n_inputs() != input.m() {
                return Err(Error::Data(format!(
                    "network expects {} inputs, got {}",
                    network.n_inputs(),
                    input.m()
                )));
            }
            input.rows().map(|r| network.predict(r)).collect()
        }
        ModelBody::WeightedAverage { weights } => input
            .rows()
            .map(|r| r.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>())
            .collect(),
    };
    if let Some(bad) = out.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Numerical(format!("{} produced probability {bad}", model.kind)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for k in ModelKind::GRID {
            assert_eq!(ModelKind::from_label(k.label()), Some(k));
        }
        assert_eq!(ModelKind::from_label("tsnn_student"), Some(ModelKind::TsnnStudent));
        assert_eq!(ModelKind::from_label("meta"), Some(ModelKind::MetaFusion));
        assert_eq!(ModelKind::from_label("svm"), None);
    }

    #[test]
    fn hand_built_logistic_predicts_sigmoid() {
        let mut net = Network::zeros(vec![2, 1], Activation::Relu);
        net.set_params(vec![0.5, -1.25, 0.1]);
        let model = TrainedModel {
            kind: ModelKind::Lr,
            input_schema: vec!["a".into(), "b".into()],
            uses_knowledge_input: false,
            preprocess: None,
            body: ModelBody::Network { network: net },
            loss_trace: vec![],
            seed: 0,
            config: serde_json::Value::Null,
        };
        let x = FeatureMatrix::new(vec!["r".into()], vec!["a".into(), "b".into()], vec![2.0, 0.4]).unwrap();
        let p = predict(&model, &x, None).unwrap();
        let z: f64 = 0.5 * 2.0 - 1.25 * 0.4 + 0.1;
        assert!((p[0] - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);

        let wrong = FeatureMatrix::new(vec!["r".into()], vec!["a".into(), "c".into()], vec![2.0, 0.4]).unwrap();
        let e = predict(&model, &wrong, None).unwrap_err().to_string();
        assert!(e.contains('b') && e.contains('c'), "{e}");
    }
}
