//! Small dense networks with leaky-rectifier hidden units and a sigmoid
//! output, trained with Adam. Shared by the GANs and the MLP classifier.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;

pub const LEAKY_SLOPE: f64 = 0.2;
/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside log terms.
pub const PROB_EPS: f64 = 1e-7;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub sizes: Vec<usize>,
    pub layers: Vec<Dense>,
}

/// Activations kept from a forward pass.
pub struct Cache {
    /// Input of every layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every layer; the last one holds the output logits.
    pre: Vec<Array2<f64>>,
}

impl Cache {
    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("net has at least one layer")
    }

    pub fn probs(&self) -> Array2<f64> {
        self.logits().mapv(sigmoid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Grads {
    pub fn flatten(&self) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut StreamRng) -> Self {
        assert!(sizes.len() >= 2, "a net needs input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|s| {
                let limit = (6.0 / (s[0] + s[1]) as f64).sqrt();
                Dense {
                    w: Array2::from_shape_fn((s[0], s[1]), |_| rng.random_range(-limit..limit)),
                    b: Array1::zeros(s[1]),
                }
            })
            .collect();
        Self {
            sizes: sizes.to_vec(),
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|p| {
                *p = it.next().expect("length checked");
            });
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &Array2<f64>) -> Cache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = a.dot(&l.w) + &l.b;
            let next = if i + 1 < self.layers.len() {
                z.mapv(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
            } else {
                z.clone()
            };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Cache { inputs, pre }
    }

    /// Sigmoid outputs for a batch.
    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward(x).probs()
    }

    pub fn predict_one(&self, x: &[f64]) -> Vec<f64> {
        let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
        self.predict(&row).row(0).to_vec()
    }

    /// Back-propagates `d_logits` (gradient w.r.t. the output pre-activation)
    /// and returns parameter gradients plus the gradient w.r.t. the input.
    pub fn backward(&self, cache: &Cache, d_logits: Array2<f64>) -> (Grads, Array2<f64>) {
        let n = self.layers.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut delta = d_logits;
        for i in (0..n).rev() {
            gw.push(cache.inputs[i].t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            let d_in = delta.dot(&self.layers[i].w.t());
            delta = if i > 0 {
                let z = &cache.pre[i - 1];
                let mut d = d_in;
                d.zip_mut_with(z, |g, &zv| {
                    if zv <= 0.0 {
                        *g *= LEAKY_SLOPE;
                    }
                });
                d
            } else {
                d_in
            };
        }
        gw.reverse();
        gb.reverse();
        (Grads { w: gw, b: gb }, delta)
    }
}

/// Mean binary cross-entropy over sigmoid outputs, with the gradient
/// w.r.t. the logits. Targets are 0 or 1 (or anything in between).
pub fn bce_with_logits(logits: &Array2<f64>, targets: &[f64]) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for (i, (&z, &t)) in logits.column(0).iter().zip(targets).enumerate() {
        let p = sigmoid(z);
        let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        // d/dz of the clamped terms; zero where the clamp is active
        let inside = p > PROB_EPS && p < 1.0 - PROB_EPS;
        grad[[i, 0]] = if inside { (p - t) / n } else { 0.0 };
    }
    (loss / n, grad)
}

/// Adam optimizer state for one [`DenseNet`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &DenseNet, lr: f64, beta1: f64, beta2: f64) -> Self {
        let zeros = Grads {
            w: net.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            b: net.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        };
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, g: &Grads) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            ndarray::Zip::from(&mut layer.w)
                .and(&mut self.m.w[i])
                .and(&mut self.v.w[i])
                .and(&g.w[i])
                .for_each(|p, m, v, &g| upd(p, m, v, g));
            ndarray::Zip::from(&mut layer.b)
                .and(&mut self.m.b[i])
                .and(&mut self.v.b[i])
                .and(&g.b[i])
                .for_each(|p, m, v, &g| upd(p, m, v, g));
        }
    }
}

/// Stacks rows into a matrix.
pub fn to_matrix<R: AsRef<[f64]>>(rows: &[R]) -> Array2<f64> {
    let cols = rows.first().map_or(0, |r| r.as_ref().len());
    let mut m = Array2::zeros((rows.len(), cols));
    for (mut dst, src) in m.rows_mut().into_iter().zip(rows) {
        dst.iter_mut().zip(src.as_ref()).for_each(|(d, s)| *d = *s);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn outputs_in_unit_interval() {
        let mut r = StreamRng::seed_from_u64(3);
        let net = DenseNet::new(&[4, 8, 1], &mut r);
        let x = Array2::from_shape_fn((16, 4), |_| r.random_range(-50.0..50.0));
        assert!(net.predict(&x).iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bce_gradient_matches_finite_difference() {
        let mut r = StreamRng::seed_from_u64(11);
        let mut net = DenseNet::new(&[3, 5, 4, 1], &mut r);
        let x = Array2::from_shape_fn((7, 3), |_| r.random_range(-1.0..1.0));
        let t: Vec<f64> = (0..7).map(|i| f64::from(i % 2)).collect();
        let cache = net.forward(&x);
        let (_, dl) = bce_with_logits(cache.logits(), &t);
        let (g, _) = net.backward(&cache, dl);
        let analytic = g.flatten();
        let base = net.params();
        let h = 1e-5;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            net.set_params(&p);
            let lp = bce_with_logits(net.forward(&x).logits(), &t).0;
            p[i] -= 2.0 * h;
            net.set_params(&p);
            let lm = bce_with_logits(net.forward(&x).logits(), &t).0;
            let num = (lp - lm) / (2.0 * h);
            let scale = num.abs().max(analytic[i].abs()).max(1e-6);
            assert!(
                (num - analytic[i]).abs() / scale < 1e-4,
                "param {i}: {num} vs {}",
                analytic[i]
            );
        }
    }
}
