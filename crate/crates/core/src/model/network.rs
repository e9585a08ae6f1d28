use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected network with a single sigmoid output.
/// `sizes = [inputs, hidden.., 1]`; parameters are stored flat, layer by
/// layer, each layer as its row-major weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Intermediate values of one training forward pass.
pub struct ForwardCache {
    /// Input of every layer (after dropout for hidden outputs).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    /// Dropout multipliers of the hidden layers (empty when disabled).
    masks: Vec<Vec<f64>>,
    pub logit: f64,
}

impl Network {
    /// All-zero parameters.
    pub fn zeros(sizes: Vec<usize>, activation: Activation) -> Network {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1, "network must end in one output");
        let n = Network::count(&sizes);
        Network {
            sizes,
            activation,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng>(sizes: Vec<usize>, activation: Activation, rng: &mut R) -> Network {
        let mut net = Network::zeros(sizes, activation);
        let mut off = 0;
        for l in 0..net.layers() {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = rng.random_range(-limit..limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers());
        let mut off = 0;
        for l in 0..self.layers() {
            out.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        out
    }

    fn affine(&self, off: usize, n_in: usize, n_out: usize, a: &[f64]) -> Vec<f64> {
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        (0..n_out)
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>() + b[o]
            })
            .collect()
    }

    /// Output logit with dropout disabled.
    pub fn logit(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_inputs());
        let mut a = x.to_vec();
        let offs = self.offsets();
        for l in 0..self.layers() {
            let z = self.affine(offs[l], self.sizes[l], self.sizes[l + 1], &a);
            if l + 1 == self.layers() {
                return z[0];
            }
            a = z.into_iter().map(|v| self.activation.apply(v)).collect();
        }
        unreachable!()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Training forward pass. With `dropout = Some((rate, rng))` every hidden
    /// unit is zeroed with probability `rate` and survivors are scaled by
    /// 1/(1-rate).
    pub fn forward<R: Rng>(&self, x: &[f64], mut dropout: Option<(f64, &mut R)>) -> ForwardCache {
        let offs = self.offsets();
        let mut inputs = Vec::with_capacity(self.layers());
        let mut pre = Vec::new();
        let mut masks = Vec::new();
        let mut a = x.to_vec();
        for l in 0..self.layers() {
            let z = self.affine(offs[l], self.sizes[l], self.sizes[l + 1], &a);
            inputs.push(std::mem::take(&mut a));
            if l + 1 == self.layers() {
                return ForwardCache {
                    inputs,
                    pre,
                    masks,
                    logit: z[0],
                };
            }
            let mut h: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
            if let Some((rate, rng)) = dropout.as_mut() {
                if *rate > 0.0 {
                    let keep = 1.0 / (1.0 - *rate);
                    let mask: Vec<f64> = h
                        .iter()
                        .map(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep })
                        .collect();
                    for (v, m) in h.iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    masks.push(mask);
                }
            }
            pre.push(z);
            a = h;
        }
        unreachable!()
    }

    /// Accumulate `dloss/dlogit` back through the cached pass into `grad`.
    pub fn backward(&self, cache: &ForwardCache, dlogit: f64, grad: &mut [f64]) {
        let offs = self.offsets();
        let mut delta = vec![dlogit];
        for l in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offs[l];
            let a = &cache.inputs[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (gi, x) in g.iter_mut().zip(a) {
                    *gi += d * x;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += wi * d;
                }
            }
            let hidden = l - 1;
            if let Some(mask) = cache.masks.get(hidden) {
                for (p, m) in prev.iter_mut().zip(mask) {
                    *p *= m;
                }
            }
            for (p, z) in prev.iter_mut().zip(&cache.pre[hidden]) {
                *p *= self.activation.derivative(*z);
            }
            delta = prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn forward_without_dropout_matches_logit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::glorot(vec![3, 4, 4, 1], Activation::Tanh, &mut rng);
        let x = [0.3, -1.2, 0.7];
        let c = net.forward::<ChaCha8Rng>(&x, None);
        assert_eq!(c.logit, net.logit(&x));
    }

    #[test]
    fn parameter_count() {
        let net = Network::zeros(vec![7, 8, 8, 8, 1], Activation::Relu);
        assert_eq!(net.params().len(), 7 * 8 + 8 + 2 * (8 * 8 + 8) + 8 + 1);
    }
}
