use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier};
use crate::error::{Error, Result};
use crate::nn::{bce_with_logits, to_matrix, Adam, DenseNet};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub net: DenseNet,
    /// Full-data cross-entropy after each epoch.
    pub loss_log: Vec<f64>,
}

impl Classifier for MlpClassifier {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.net.predict_one(x)[0]
    }

    fn score_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        if rows.is_empty() {
            return Vec::new();
        }
        self.net.predict(&to_matrix(rows)).column(0).to_vec()
    }
}

/// Mini-batch Adam on binary cross-entropy.
pub fn train_mlp(rows: &[Vec<f64>], labels: &[bool], hyper: &MlpHyper, seed: u64) -> Result<MlpClassifier> {
    let dim = check_training_set(rows, labels)?;
    if hyper.epochs == 0 || hyper.batch_size == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::invalid("MLP epochs, batch size and step must be positive"));
    }
    let mut sizes = vec![dim];
    sizes.extend(&hyper.hidden);
    sizes.push(1);
    let mut init = rng::stream(seed, &[0x31F, 0]);
    let mut shuffle = rng::stream(seed, &[0x31F, 1]);
    let mut net = DenseNet::new(&sizes, &mut init);
    let mut opt = Adam::new(&net, hyper.learning_rate, 0.9, 0.999);

    let x_all = to_matrix(rows);
    let y_all: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut loss_log = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(hyper.batch_size) {
            let x = x_all.select(ndarray::Axis(0), chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| y_all[i]).collect();
            let cache = net.forward(&x);
            let (_, d) = bce_with_logits(cache.logits(), &y);
            let (g, _) = net.backward(&cache, d);
            opt.step(&mut net, &g);
        }
        let (loss, _) = bce_with_logits(net.forward(&x_all).logits(), &y_all);
        if !loss.is_finite() || !net.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_log.push(loss);
    }
    Ok(MlpClassifier { net, loss_log })
}
