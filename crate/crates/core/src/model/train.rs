use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, Objective};
use super::network::{Activation, Network};
use super::optim::{Optimizer, OptimizerKind};
use super::{ModelBody, ModelKind, TrainedModel};
use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::matrix::FeatureMatrix;
use crate::pce::KnowledgeScoreVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: 3,
            hidden_units: 8,
            dropout_rate: 0.5,
            epochs: 50,
            batch_size: 8,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate {} outside [0,1)", self.dropout_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if self.hidden_layers > 0 && self.hidden_units == 0 {
            return Err(Error::Config("hidden_units must be at least 1".into()));
        }
        Ok(())
    }

    fn sizes(&self, n_inputs: usize) -> Vec<usize> {
        let mut s = vec![n_inputs];
        s.extend(std::iter::repeat_n(self.hidden_units, self.hidden_layers));
        s.push(1);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            max_iter: 5000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionWeights {
    /// Weight of the knowledge term in the single-network objective.
    pub pi: f64,
    pub pi_teacher: f64,
    pub pi_student: f64,
    pub tsnn_outer_iterations: usize,
    pub tsnn_inner_epochs: usize,
}

impl Default for InjectionWeights {
    fn default() -> Self {
        InjectionWeights {
            pi: 0.653,
            pi_teacher: 0.653,
            pi_student: 1.0,
            tsnn_outer_iterations: 5,
            tsnn_inner_epochs: 10,
        }
    }
}

impl InjectionWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::Config(format!("pi {} outside [0,1]", self.pi)));
        }
        if !(self.pi_teacher >= 0.0 && self.pi_student >= 0.0) {
            return Err(Error::Config("pi_teacher and pi_student must be non-negative".into()));
        }
        Ok(())
    }
}

fn check_labels(features: &FeatureMatrix, labels: &[u8]) -> Result<()> {
    if labels.len() != features.n() {
        return Err(Error::Data(format!(
            "{} labels for {} instances",
            labels.len(),
            features.n()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Data("labels must be 0/1".into()));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Data("training labels must contain both classes".into()));
    }
    Ok(())
}

fn check_knowledge<'a>(
    features: &FeatureMatrix,
    knowledge: Option<&'a KnowledgeScoreVector>,
    kind: ModelKind,
) -> Result<&'a KnowledgeScoreVector> {
    let k = knowledge.ok_or_else(|| Error::Data(format!("{kind} training needs knowledge scores")))?;
    if k.matrix().instance_ids() != features.instance_ids() {
        return Err(Error::Data(format!(
            "{kind}: knowledge scores are not aligned with the feature rows"
        )));
    }
    Ok(k)
}

/// Fit the input standardizer and return the z-scored design.
fn standardized(input: &FeatureMatrix) -> Result<(Standardizer, FeatureMatrix)> {
    let s = Standardizer::fit(input)?;
    let z = s.apply(input)?;
    Ok((s, z))
}

fn rows(m: &FeatureMatrix) -> Vec<&[f64]> {
    m.rows().collect()
}

/// Mean cross-entropy of a single-layer network and its gradient, the
/// full-batch objective of logistic regression.
pub fn logistic_loss_and_grad(net: &Network, rows: &[&[f64]], y: &[f64]) -> (f64, Vec<f64>) {
    let n = rows.len() as f64;
    let mut grad = vec![0.0; net.params().len()];
    let d = net.n_inputs();
    let mut loss = 0.0;
    for (x, &t) in rows.iter().zip(y) {
        let p = net.predict(x);
        loss += super::loss::cross_entropy(t, p);
        let r = p - t;
        for (g, xi) in grad[..d].iter_mut().zip(x.iter()) {
            *g += r * xi;
        }
        grad[d] += r;
    }
    for g in &mut grad {
        *g /= n;
    }
    (loss / n, grad)
}

/// Largest eigenvalue of [X,1]'[X,1]/n by power iteration, matrix-free.
fn gram_spectral_norm(rows: &[&[f64]]) -> f64 {
    let n = rows.len() as f64;
    let d = rows.first().map_or(0, |r| r.len());
    let mut v = vec![1.0; d + 1];
    let apply = |v: &[f64]| {
        let mut w = vec![0.0; d + 1];
        for x in rows {
            let xv = x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + v[d];
            for (wi, xi) in w[..d].iter_mut().zip(x.iter()) {
                *wi += xi * xv;
            }
            w[d] += xv;
        }
        for wi in &mut w {
            *wi /= n;
        }
        w
    };
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = apply(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / norm).collect();
        lambda = norm;
    }
    let w = apply(&v);
    lambda.max(w.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Full-batch gradient descent on mean cross-entropy from zero weights.
/// Step size is the inverse Lipschitz constant of the gradient.
/// Returns the fitted single-layer network and the per-iteration loss.
pub fn fit_logistic(x: &FeatureMatrix, labels: &[u8], cfg: &LogisticConfig) -> Result<(Network, Vec<f64>)> {
    check_labels(x, labels)?;
    let rows = rows(x);
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let mut net = Network::zeros(vec![x.m(), 1], Activation::Relu);
    let lipschitz = 0.25 * gram_spectral_norm(&rows);
    let step = 1.0 / lipschitz.max(1e-12);
    let mut trace = Vec::new();
    for iter in 0..cfg.max_iter.max(1) {
        let (loss, grad) = logistic_loss_and_grad(&net, &rows, &y);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "logistic regression: non-finite loss at iteration {iter} (step {step:e})"
            )));
        }
        trace.push(loss);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < cfg.tolerance {
            break;
        }
        for (p, g) in net.params_mut().iter_mut().zip(&grad) {
            *p -= step * g;
        }
    }
    Ok((net, trace))
}

fn logistic_model(
    kind: ModelKind,
    input: &FeatureMatrix,
    labels: &[u8],
    cfg: &LogisticConfig,
    uses_knowledge_input: bool,
) -> Result<TrainedModel> {
    let (std, z) = standardized(input)?;
    let (network, loss_trace) = fit_logistic(&z, labels, cfg)?;
    Ok(TrainedModel {
        kind,
        input_schema: input.feature_names().to_vec(),
        uses_knowledge_input,
        preprocess: Some(std),
        body: ModelBody::Network { network },
        loss_trace,
        seed: 0,
        config: serde_json::to_value(cfg)?,
    })
}

/// Logistic regression on the features alone.
pub fn train_logistic(features: &FeatureMatrix, labels: &[u8], cfg: &LogisticConfig) -> Result<TrainedModel> {
    logistic_model(ModelKind::Lr, features, labels, cfg, false)
}

/// Logistic regression with the knowledge scores appended as features.
pub fn train_logistic_k(
    features: &FeatureMatrix,
    knowledge: &KnowledgeScoreVector,
    labels: &[u8],
    cfg: &LogisticConfig,
) -> Result<TrainedModel> {
    let k = check_knowledge(features, Some(knowledge), ModelKind::LrK)?;
    logistic_model(ModelKind::LrK, &features.hstack(k.matrix())?, labels, cfg, true)
}

/// `(1 - pi) CE(y, p) + pi CE(s, p)`.
pub fn kenn_objective(labels: &[u8], knowledge: Vec<f64>, pi: f64) -> Objective {
    let y = labels.iter().map(|&v| f64::from(v)).collect();
    Objective::new().term(1.0 - pi, y).term(pi, knowledge)
}

/// Teacher phase: `CE(student, p) + pi_T CE(s, p)`.
pub fn teacher_objective(student: Vec<f64>, knowledge: Vec<f64>, pi_teacher: f64) -> Objective {
    Objective::new().term(1.0, student).term(pi_teacher, knowledge)
}

/// Student phase: `CE(teacher, p) + pi_S CE(y, p)`.
pub fn student_objective(teacher: Vec<f64>, labels: &[u8], pi_student: f64) -> Objective {
    let y = labels.iter().map(|&v| f64::from(v)).collect();
    Objective::new().term(1.0, teacher).term(pi_student, y)
}

/// Network plus optimizer state, trained epoch by epoch.
struct Learner {
    net: Network,
    opt: Optimizer,
    trace: Vec<f64>,
}

impl Learner {
    fn new(net: Network, cfg: &MlpConfig) -> Learner {
        let n = net.params().len();
        Learner {
            net,
            opt: Optimizer::new(cfg.optimizer, cfg.learning_rate, n),
            trace: Vec::new(),
        }
    }

    fn epochs(
        &mut self,
        rows: &[&[f64]],
        objective: &Objective,
        cfg: &MlpConfig,
        rng: &mut ChaCha8Rng,
        epochs: usize,
    ) -> Result<()> {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            let mut batches = 0usize;
            for batch in order.chunks(cfg.batch_size) {
                let (loss, grad) = loss_and_grad(&self.net, rows, objective, batch, Some((cfg.dropout_rate, &mut *rng)));
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite training loss at epoch {} batch {batches}",
                        self.trace.len()
                    )));
                }
                self.opt.step(self.net.params_mut(), &grad);
                total += loss;
                batches += 1;
            }
            self.trace.push(total / batches as f64);
        }
        Ok(())
    }

    fn predict_all(&self, rows: &[&[f64]]) -> Vec<f64> {
        rows.iter().map(|r| self.net.predict(r)).collect()
    }
}

fn network_model(
    kind: ModelKind,
    input: &FeatureMatrix,
    std: Standardizer,
    learner: Learner,
    uses_knowledge_input: bool,
    cfg: &MlpConfig,
    injection: Option<&InjectionWeights>,
) -> Result<TrainedModel> {
    Ok(TrainedModel {
        kind,
        input_schema: input.feature_names().to_vec(),
        uses_knowledge_input,
        preprocess: Some(std),
        body: ModelBody::Network { network: learner.net },
        loss_trace: learner.trace,
        seed: cfg.seed,
        config: serde_json::json!({ "mlp": cfg, "injection": injection }),
    })
}

/// Dense network of kind `nn`, `nn_k` (knowledge appended to the input) or
/// `kenn` (objective `(1-pi) CE(y,p) + pi CE(s,p)`).
pub fn train_mlp(
    features: &FeatureMatrix,
    labels: &[u8],
    cfg: &MlpConfig,
    knowledge: Option<&KnowledgeScoreVector>,
    injection: Option<&InjectionWeights>,
    kind: ModelKind,
) -> Result<TrainedModel> {
    cfg.validate()?;
    check_labels(features, labels)?;
    let default_weights = InjectionWeights::default();
    let weights = injection.unwrap_or(&default_weights);
    weights.validate()?;
    let (input, objective, uses_knowledge_input) = match kind {
        ModelKind::Nn => (features.clone(), Objective::labels(labels), false),
        ModelKind::NnK => {
            let k = check_knowledge(features, knowledge, kind)?;
            (features.hstack(k.matrix())?, Objective::labels(labels), true)
        }
        ModelKind::Kenn => {
            let k = check_knowledge(features, knowledge, kind)?;
            (features.clone(), kenn_objective(labels, k.primary(), weights.pi), false)
        }
        other => {
            return Err(Error::Config(format!("train_mlp cannot train kind {other}")));
        }
    };
    let (std, z) = standardized(&input)?;
    let rows = rows(&z);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = Network::glorot(cfg.sizes(z.m()), cfg.activation, &mut rng);
    let mut learner = Learner::new(net, cfg);
    learner.epochs(&rows, &objective, cfg, &mut rng, cfg.epochs)?;
    let injection = (kind == ModelKind::Kenn).then_some(weights);
    network_model(kind, &input, std, learner, uses_knowledge_input, cfg, injection)
}

/// Teacher-student pair trained by alternating minimisation.
///
/// The student is first fitted as a plain network for `cfg.epochs`; the
/// teacher starts as a copy of it. Each outer round then trains the teacher
/// on `CE(student, p) + pi_T CE(s, p)` with the student frozen, and the
/// student on `CE(teacher, p) + pi_S CE(y, p)` with the teacher frozen.
pub fn train_tsnn(
    features: &FeatureMatrix,
    labels: &[u8],
    knowledge: &KnowledgeScoreVector,
    cfg: &MlpConfig,
    injection: &InjectionWeights,
) -> Result<(TrainedModel, TrainedModel)> {
    cfg.validate()?;
    injection.validate()?;
    check_labels(features, labels)?;
    let s = check_knowledge(features, Some(knowledge), ModelKind::TsnnTeacher)?.primary();

    let (std, z) = standardized(features)?;
    let rows = rows(&z);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = Network::glorot(cfg.sizes(z.m()), cfg.activation, &mut rng);
    let mut student = Learner::new(net, cfg);
    student.epochs(&rows, &Objective::labels(labels), cfg, &mut rng, cfg.epochs)?;

    let mut teacher = Learner::new(student.net.clone(), cfg);
    for _ in 0..injection.tsnn_outer_iterations {
        let from_student = student.predict_all(&rows);
        let obj = teacher_objective(from_student, s.clone(), injection.pi_teacher);
        teacher.epochs(&rows, &obj, cfg, &mut rng, injection.tsnn_inner_epochs)?;

        let from_teacher = teacher.predict_all(&rows);
        let obj = student_objective(from_teacher, labels, injection.pi_student);
        student.epochs(&rows, &obj, cfg, &mut rng, injection.tsnn_inner_epochs)?;
    }
    let t = network_model(ModelKind::TsnnTeacher, features, std.clone(), teacher, false, cfg, Some(injection))?;
    let st = network_model(ModelKind::TsnnStudent, features, std, student, false, cfg, Some(injection))?;
    Ok((t, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::predict;

    fn fixture(n: usize, d: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z = 2.0 * row[0] - row[1 % d];
            labels.push(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-z).exp())));
            values.extend(row);
        }
        let m = FeatureMatrix::new(
            (0..n).map(|i| format!("i{i}")).collect(),
            (0..d).map(|j| format!("x{j}")).collect(),
            values,
        )
        .unwrap();
        (m, labels)
    }

    #[test]
    fn intercept_only_fits_base_rate() {
        let m = FeatureMatrix::empty((0..10).map(|i| i.to_string()).collect());
        let labels = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let model = train_logistic(&m, &labels, &LogisticConfig::default()).unwrap();
        for p in predict(&model, &m, None).unwrap() {
            assert!((p - 0.4).abs() < 1e-5, "{p}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = MlpConfig::default();
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
        c.dropout_rate = 0.0;
        c.batch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn injected_kind_needs_knowledge() {
        let (m, y) = fixture(30, 3, 1);
        let e = train_mlp(&m, &y, &MlpConfig::default(), None, None, ModelKind::Kenn).unwrap_err();
        assert!(e.to_string().contains("knowledge"));
    }

    #[test]
    fn mlp_is_seed_deterministic() {
        let (m, y) = fixture(60, 3, 2);
        let cfg = MlpConfig {
            epochs: 3,
            seed: 9,
            ..MlpConfig::default()
        };
        let a = train_mlp(&m, &y, &cfg, None, None, ModelKind::Nn).unwrap();
        let b = train_mlp(&m, &y, &cfg, None, None, ModelKind::Nn).unwrap();
        assert_eq!(a, b);
        let c = train_mlp(&m, &y, &MlpConfig { seed: 10, ..cfg }, None, None, ModelKind::Nn).unwrap();
        assert_ne!(a.loss_trace, c.loss_trace);
    }
}
