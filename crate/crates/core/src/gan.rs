//! Genuine/impostor GAN pair used to densify each class of the training
//! windows.
//!
//! Each GAN is a pair of dense nets. The discriminator ascends
//! `E[log D(x)] + E[log(1 - D(G(z)))]`; the generator uses the
//! non-saturating surrogate and ascends `E[log D(G(z))]`. Generators end in
//! a sigmoid, so samples live in the normalized `[0,1]` window space.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::kde_on_grid;
use crate::features::{WindowLabel, WindowVector};
use crate::nn::{bce_with_logits, Adam, DenseNet, Grads};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 64,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            d_steps: 1,
            noise_dim: 32,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl GanTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0
            || self.batch_size == 0
            || self.d_steps == 0
            || self.noise_dim == 0
            || !(self.learning_rate > 0.0)
            || !(self.beta1 > 0.0 && self.beta1 < 1.0)
            || !(self.beta2 > 0.0 && self.beta2 < 1.0)
        {
            return Err(Error::invalid("GAN config values must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub discriminator: f64,
    pub generator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gan {
    pub generator: DenseNet,
    pub discriminator: DenseNet,
    pub noise_dim: usize,
    pub train_log: Vec<EpochLoss>,
}

impl Gan {
    /// Untrained nets: `noise -> hidden.. -> dim` and `dim -> hidden.. -> 1`.
    pub fn init(input_dim: usize, cfg: &GanTrainConfig, rng: &mut StreamRng) -> Self {
        let mut gs = vec![cfg.noise_dim];
        gs.extend(&cfg.hidden);
        gs.push(input_dim);
        let mut ds = vec![input_dim];
        ds.extend(&cfg.hidden);
        ds.push(1);
        Self {
            generator: DenseNet::new(&gs, rng),
            discriminator: DenseNet::new(&ds, rng),
            noise_dim: cfg.noise_dim,
            train_log: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.generator.output_dim()
    }
}

pub fn sample_noise(rows: usize, dim: usize, rng: &mut StreamRng) -> Array2<f64> {
    Array2::from_shape_fn((rows, dim), |_| rng.sample(StandardNormal))
}

/// Discriminator loss `-(mean log D(x) + mean log(1 - D(G(z))))` and its
/// gradient w.r.t. the discriminator parameters.
pub fn discriminator_loss(disc: &DenseNet, gen: &DenseNet, real: &Array2<f64>, noise: &Array2<f64>) -> (f64, Grads) {
    let fake = gen.predict(noise);
    let real_cache = disc.forward(real);
    let fake_cache = disc.forward(&fake);
    let (l_real, d_real) = bce_with_logits(real_cache.logits(), &vec![1.0; real.nrows()]);
    let (l_fake, d_fake) = bce_with_logits(fake_cache.logits(), &vec![0.0; fake.nrows()]);
    let (g_real, _) = disc.backward(&real_cache, d_real);
    let (g_fake, _) = disc.backward(&fake_cache, d_fake);
    let grads = Grads {
        w: g_real.w.iter().zip(&g_fake.w).map(|(a, b)| a + b).collect(),
        b: g_real.b.iter().zip(&g_fake.b).map(|(a, b)| a + b).collect(),
    };
    (l_real + l_fake, grads)
}

/// Non-saturating generator loss `-mean log D(G(z))` and its gradient
/// w.r.t. the generator parameters.
pub fn generator_loss(disc: &DenseNet, gen: &DenseNet, noise: &Array2<f64>) -> (f64, Grads) {
    let g_cache = gen.forward(noise);
    let fake = g_cache.probs();
    let d_cache = disc.forward(&fake);
    let (loss, d_logits) = bce_with_logits(d_cache.logits(), &vec![1.0; fake.nrows()]);
    let (_, d_fake) = disc.backward(&d_cache, d_logits);
    // through the generator's output sigmoid
    let d_gen_logits = d_fake * &fake.mapv(|s| s * (1.0 - s));
    let (grads, _) = gen.backward(&g_cache, d_gen_logits);
    (loss, grads)
}

/// Stateful alternating trainer for one GAN.
pub struct GanTrainer {
    pub gan: Gan,
    d_opt: Adam,
    g_opt: Adam,
    rng: StreamRng,
}

impl GanTrainer {
    pub fn new(input_dim: usize, cfg: &GanTrainConfig) -> Self {
        let mut init_rng = rng::stream(cfg.seed, &[0x6A4, 0]);
        let gan = Gan::init(input_dim, cfg, &mut init_rng);
        let d_opt = Adam::new(&gan.discriminator, cfg.learning_rate, cfg.beta1, cfg.beta2);
        let g_opt = Adam::new(&gan.generator, cfg.learning_rate, cfg.beta1, cfg.beta2);
        Self {
            gan,
            d_opt,
            g_opt,
            rng: rng::stream(cfg.seed, &[0x6A4, 1]),
        }
    }

    /// One discriminator update on a real batch against fresh fakes.
    pub fn d_step(&mut self, real: &Array2<f64>) -> f64 {
        let noise = sample_noise(real.nrows(), self.gan.noise_dim, &mut self.rng);
        let (loss, g) = discriminator_loss(&self.gan.discriminator, &self.gan.generator, real, &noise);
        self.d_opt.step(&mut self.gan.discriminator, &g);
        loss
    }

    pub fn g_step(&mut self, batch: usize) -> f64 {
        let noise = sample_noise(batch, self.gan.noise_dim, &mut self.rng);
        let (loss, g) = generator_loss(&self.gan.discriminator, &self.gan.generator, &noise);
        self.g_opt.step(&mut self.gan.generator, &g);
        loss
    }
}

/// Trains one GAN on real normalized rows.
pub fn train_gan(real: &[Vec<f64>], cfg: &GanTrainConfig) -> Result<Gan> {
    cfg.validate()?;
    if real.len() < 2 * cfg.batch_size {
        return Err(Error::TooFewSamples {
            needed: 2 * cfg.batch_size,
            got: real.len(),
        });
    }
    let dim = real[0].len();
    if real
        .iter()
        .any(|r| r.len() != dim || r.iter().any(|v| !(0.0..=1.0).contains(v)))
    {
        return Err(Error::invalid("GAN inputs must be equal-length rows in [0,1]"));
    }
    let mut trainer = GanTrainer::new(dim, cfg);
    let mut order: Vec<usize> = (0..real.len()).collect();
    let batches = real.len() / cfg.batch_size;
    let mut batch = Array2::zeros((cfg.batch_size, dim));

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut trainer.rng);
        let (mut d_sum, mut g_sum) = (0.0, 0.0);
        for b in 0..batches {
            for (mut row, &idx) in batch
                .rows_mut()
                .into_iter()
                .zip(&order[b * cfg.batch_size..(b + 1) * cfg.batch_size])
            {
                row.iter_mut().zip(&real[idx]).for_each(|(d, s)| *d = *s);
            }
            let mut d_loss = 0.0;
            for _ in 0..cfg.d_steps {
                d_loss = trainer.d_step(&batch);
            }
            d_sum += d_loss;
            g_sum += trainer.g_step(cfg.batch_size);
        }
        let entry = EpochLoss {
            discriminator: d_sum / batches as f64,
            generator: g_sum / batches as f64,
        };
        if !entry.discriminator.is_finite()
            || !entry.generator.is_finite()
            || !trainer.gan.generator.is_finite()
            || !trainer.gan.discriminator.is_finite()
        {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trainer.gan.train_log.push(entry);
    }
    Ok(trainer.gan)
}

/// Draws `count` generator outputs.
pub fn generate_rows(gen: &DenseNet, noise_dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if count == 0 {
        return Vec::new();
    }
    let mut r = rng::stream(seed, &[0x6E4]);
    let noise = sample_noise(count, noise_dim, &mut r);
    gen.predict(&noise).rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn generate_samples(gan: &Gan, count: usize, seed: u64, user_id: &str, label: WindowLabel) -> Vec<WindowVector> {
    generate_rows(&gan.generator, gan.noise_dim, count, seed)
        .into_iter()
        .enumerate()
        .map(|(i, values)| WindowVector {
            values,
            user_id: user_id.to_string(),
            window_index: i,
            label,
        })
        .collect()
}

/// Trained Genuine-GAN and Impostor-GAN for one user model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanPair {
    pub genuine: Gan,
    pub impostor: Gan,
    pub noise_dim: usize,
    pub input_dim: usize,
}

impl GanPair {
    /// Trains both GANs. A class with fewer than `2 * batch_size` rows is
    /// trained with batches of half its size.
    pub fn train(genuine: &[Vec<f64>], impostor: &[Vec<f64>], cfg: &GanTrainConfig) -> Result<Self> {
        let sized = |rows: &[Vec<f64>], tag: u64| GanTrainConfig {
            seed: rng::derive_seed(cfg.seed, &[tag]),
            batch_size: cfg.batch_size.min(rows.len() / 2).max(1),
            ..cfg.clone()
        };
        let g_cfg = sized(genuine, 1);
        let i_cfg = sized(impostor, 2);
        let genuine = train_gan(genuine, &g_cfg)?;
        let impostor = train_gan(impostor, &i_cfg)?;
        Ok(Self {
            noise_dim: cfg.noise_dim,
            input_dim: genuine.input_dim(),
            genuine,
            impostor,
        })
    }

    /// `count` synthetic genuine and `count` synthetic impostor rows.
    pub fn generate(&self, count: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            generate_rows(
                &self.genuine.generator,
                self.noise_dim,
                count,
                rng::derive_seed(seed, &[1]),
            ),
            generate_rows(
                &self.impostor.generator,
                self.noise_dim,
                count,
                rng::derive_seed(seed, &[2]),
            ),
        )
    }
}

/// Candidate synthetic counts searched by default.
pub const DEFAULT_SYNTH_CANDIDATES: [usize; 5] = [100, 250, 500, 750, 1000];

/// Picks the candidate with the lowest mean validation HTER; ties go to the
/// smaller count.
pub fn tune_synth_count<F>(candidates: &[usize], mut validation_hter: F) -> Result<usize>
where
    F: FnMut(usize) -> Result<f64>,
{
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    match sorted.as_slice() {
        [] => Err(Error::invalid("no synthetic-count candidates")),
        [only] => Ok(*only),
        _ => {
            let mut best: Option<(f64, usize)> = None;
            for &c in &sorted {
                let h = validation_hter(c)?;
                if best.is_none_or(|(bh, _)| h < bh) {
                    best = Some((h, c));
                }
            }
            Ok(best.map(|(_, c)| c).unwrap_or(sorted[0]))
        }
    }
}

pub const QUALITY_GRID: usize = 256;

/// Real vs generated densities of one dimension on `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimQuality {
    pub dim: usize,
    pub grid: Vec<f64>,
    pub real_density: Vec<f64>,
    pub generated_density: Vec<f64>,
    /// Trapezoidal integral of `min(real, generated)`; 1 means identical.
    pub overlap: f64,
}

fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    grid.windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Per-dimension KDE comparison of real and generated samples. Each curve is
/// renormalized to unit mass on the `[0,1]` grid before the overlap.
pub fn gan_quality_report(
    real: &[Vec<f64>],
    generated: &[Vec<f64>],
    dims: &[usize],
    bandwidth: Option<f64>,
) -> Result<Vec<DimQuality>> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let grid: Vec<f64> = (0..QUALITY_GRID)
        .map(|i| i as f64 / (QUALITY_GRID - 1) as f64)
        .collect();
    dims.iter()
        .map(|&d| {
            let column = |rows: &[Vec<f64>]| -> Result<Vec<f64>> {
                rows.iter()
                    .map(|r| {
                        r.get(d).copied().ok_or(Error::DimensionMismatch {
                            expected: d + 1,
                            got: r.len(),
                        })
                    })
                    .collect()
            };
            let density = |samples: Vec<f64>| {
                let mut f = kde_on_grid(&samples, &grid, bandwidth);
                let mass = trapezoid(&grid, &f);
                if mass > 0.0 {
                    f.iter_mut().for_each(|v| *v /= mass);
                }
                f
            };
            let real_density = density(column(real)?);
            let generated_density = density(column(generated)?);
            let mins: Vec<f64> = real_density
                .iter()
                .zip(&generated_density)
                .map(|(a, b)| a.min(*b))
                .collect();
            Ok(DimQuality {
                dim: d,
                overlap: trapezoid(&grid, &mins),
                grid: grid.clone(),
                real_density,
                generated_density,
            })
        })
        .collect()
}
