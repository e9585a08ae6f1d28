use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} outside (0,1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Sorted row indices of the two parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn take_train(mut idx: Vec<usize>, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    idx.shuffle(rng);
    let k = (fraction * idx.len() as f64).round() as usize;
    let test = idx.split_off(k.min(idx.len()));
    (idx, test)
}

/// Train/test partition of `labels.len()` instances. Stratified splits put
/// `round(fraction * n_class)` instances of each class in training.
pub fn split_train_test(labels: &[u8], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if labels.len() < 5 {
        return Err(Error::Data(format!("cannot split {} instances", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut test) = if spec.stratified {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [0u8, 1] {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            let (tr, te) = take_train(idx, spec.train_fraction, &mut rng);
            train.extend(tr);
            test.extend(te);
        }
        (train, test)
    } else {
        take_train((0..labels.len()).collect(), spec.train_fraction, &mut rng)
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
