#![allow(dead_code)]

pub mod adasyn_oracle;
pub mod oracle;

use touchauth::data::{synth_generate_corpus, SwipeGesture, SynthParams};

/// `count` swipes from a seeded synthetic corpus.
pub fn sample_swipes(count: usize, seed: u64) -> Vec<SwipeGesture> {
    let users = 10;
    let per_user = count.div_ceil(users);
    let corpus = synth_generate_corpus(&SynthParams::new(users, per_user, 1.0, seed)).unwrap();
    corpus.swipes.into_iter().take(count).collect()
}

/// `|a - b| <= rel * max(|a|, |b|)`, with a tiny absolute floor for values
/// that are zero up to rounding.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}

/// Two-component 2-D Gaussian mixture inside the unit square.
pub fn gmm_fixture(n: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut r = touchauth::rng::StreamRng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.06).unwrap();
    let centres = [[0.3, 0.3], [0.7, 0.65]];
    (0..n)
        .map(|i| {
            let c = centres[i % 2];
            vec![c[0] + noise.sample(&mut r), c[1] + noise.sample(&mut r)]
        })
        .collect()
}

/// Mean vector and population covariance matrix of `rows`.
pub fn mean_cov(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let cov = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / n)
                .collect()
        })
        .collect();
    (mean, cov)
}

/// (L-infinity mean error, Frobenius covariance error) of `fake` against `real`.
pub fn moment_errors(real: &[Vec<f64>], fake: &[Vec<f64>]) -> (f64, f64) {
    let (mr, cr) = mean_cov(real);
    let (mf, cf) = mean_cov(fake);
    let mean_err = mr.iter().zip(&mf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let cov_err = cr
        .iter()
        .flatten()
        .zip(cf.iter().flatten())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    (mean_err, cov_err)
}

/// Central differences of `loss` with respect to every parameter of `net`.
pub fn numeric_grad(
    net: &mut touchauth::nn::DenseNet,
    h: f64,
    mut loss: impl FnMut(&touchauth::nn::DenseNet) -> f64,
) -> Vec<f64> {
    let base = net.params();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        net.set_params(&p);
        let up = loss(net);
        p[i] = base[i] - h;
        net.set_params(&p);
        let down = loss(net);
        out.push((up - down) / (2.0 * h));
    }
    net.set_params(&base);
    out
}

/// Largest relative gap between analytic and numeric gradients.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
