use rand::Rng;

use super::network::{sigmoid, Network};

/// Probability clamp used when evaluating the loss.
pub const EPS: f64 = 1e-7;

/// Binary cross-entropy with a soft target `t` in [0,1].
pub fn cross_entropy(t: f64, p: f64) -> f64 {
    let p = p.clamp(EPS, 1.0 - EPS);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Weighted sum of soft-target cross-entropy terms sharing one prediction:
/// `loss_i = sum_k w_k * CE(t_k[i], p_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    terms: Vec<(f64, Vec<f64>)>,
}

impl Objective {
    pub fn new() -> Objective {
        Objective { terms: Vec::new() }
    }

    /// Plain label objective.
    pub fn labels(y: &[u8]) -> Objective {
        Objective::new().term(1.0, y.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn term(mut self, weight: f64, targets: Vec<f64>) -> Objective {
        if let Some((_, first)) = self.terms.first() {
            assert_eq!(first.len(), targets.len(), "objective terms must be aligned");
        }
        self.terms.push((weight, targets));
        self
    }

    pub fn len(&self) -> usize {
        self.terms.first().map_or(0, |t| t.1.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_loss(&self, i: usize, p: f64) -> f64 {
        self.terms.iter().map(|(w, t)| w * cross_entropy(t[i], p)).sum()
    }

    /// Derivative of the sample loss with respect to the output logit.
    pub fn sample_dlogit(&self, i: usize, p: f64) -> f64 {
        self.terms.iter().map(|(w, t)| w * (p - t[i])).sum()
    }
}

impl Default for Objective {
    fn default() -> Self {
        Objective::new()
    }
}

/// Rows of the design matrix by instance.
pub type Rows<'a> = &'a [&'a [f64]];

/// Mean objective over `batch` and its gradient.
pub fn loss_and_grad<R: Rng>(
    net: &Network,
    rows: Rows<'_>,
    objective: &Objective,
    batch: &[usize],
    mut dropout: Option<(f64, &mut R)>,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.params().len()];
    let mut loss = 0.0;
    for &i in batch {
        let cache = net.forward(rows[i], dropout.as_mut().map(|(r, g)| (*r, &mut **g)));
        let p = sigmoid(cache.logit);
        loss += objective.sample_loss(i, p);
        net.backward(&cache, objective.sample_dlogit(i, p), &mut grad);
    }
    let n = batch.len() as f64;
    for g in &mut grad {
        *g /= n;
    }
    (loss / n, grad)
}

/// Mean objective over `batch` with dropout disabled.
pub fn loss_only(net: &Network, rows: Rows<'_>, objective: &Objective, batch: &[usize]) -> f64 {
    batch
        .iter()
        .map(|&i| objective.sample_loss(i, net.predict(rows[i])))
        .sum::<f64>()
        / batch.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_fixtures() {
        assert!((cross_entropy(1.0, 1.0 - EPS) - 1e-7).abs() < 1e-12);
        assert!((cross_entropy(0.5, 0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cross_entropy(1.0, EPS) - 16.118095650958319).abs() < 1e-9);
        assert!((cross_entropy(1.0, 0.0) - cross_entropy(1.0, EPS)).abs() < 1e-15);
    }
}
