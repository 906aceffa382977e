mod common;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use touchauth::gan::{
    discriminator_loss, generate_rows, generator_loss, sample_noise, train_gan, GanTrainConfig, GanTrainer,
};
use touchauth::nn::DenseNet;
use touchauth::rng::StreamRng;

#[test]
fn loss_gradients_match_finite_differences() {
    for seed in 0..4u64 {
        let mut r = StreamRng::seed_from_u64(seed);
        let dim = 3;
        let mut gen = DenseNet::new(&[4, 8, dim], &mut r);
        let mut disc = DenseNet::new(&[dim, 16, 8, 1], &mut r);
        let real = Array2::from_shape_fn((6, dim), |_| r.random_range(0.0..1.0));
        let noise = sample_noise(6, 4, &mut r);

        let (_, gd) = discriminator_loss(&disc, &gen, &real, &noise);
        let num = common::numeric_grad(&mut disc, 1e-5, |d| discriminator_loss(d, &gen, &real, &noise).0);
        assert!(common::max_rel_error(&gd.flatten(), &num) < 1e-4);

        let (_, gg) = generator_loss(&disc, &gen, &noise);
        let num = common::numeric_grad(&mut gen, 1e-5, |g| generator_loss(&disc, g, &noise).0);
        assert!(common::max_rel_error(&gg.flatten(), &num) < 1e-4);
    }
}

#[test]
fn untrained_discriminator_outputs_probabilities() {
    let mut r = StreamRng::seed_from_u64(1);
    let disc = DenseNet::new(&[5, 16, 1], &mut r);
    let x = Array2::from_shape_fn((50, 5), |_| r.random_range(-100.0..100.0));
    assert!(disc.predict(&x).iter().all(|&p| (0.0..=1.0).contains(&p)));
}

#[test]
fn generator_learns_constant_target() {
    let c = vec![0.2, 0.8, 0.5, 0.35];
    let real = vec![c.clone(); 200];
    let mut hits = 0;
    for seed in 0..4 {
        let cfg = GanTrainConfig {
            seed,
            ..GanTrainConfig::default()
        };
        let gan = train_gan(&real, &cfg).unwrap();
        let out = generate_rows(&gan.generator, gan.noise_dim, 500, seed + 100);
        let worst = (0..c.len())
            .map(|j| (out.iter().map(|r| r[j]).sum::<f64>() / out.len() as f64 - c[j]).abs())
            .fold(0.0, f64::max);
        if worst <= 0.1 {
            hits += 1;
        }
    }
    assert!(hits >= 3, "constant target matched on {hits}/4 seeds");
}

#[test]
fn discriminator_loss_falls_with_frozen_generator() {
    let cfg = GanTrainConfig {
        seed: 5,
        learning_rate: 1e-3,
        ..GanTrainConfig::default()
    };
    let mut trainer = GanTrainer::new(4, &cfg);
    // real points sit in a corner far from the untrained generator's output
    let real = Array2::from_shape_fn((64, 4), |(i, _)| 0.95 + 0.0005 * (i % 10) as f64);
    // fixed fakes so successive losses are comparable
    let noise = sample_noise(64, trainer.gan.noise_dim, &mut StreamRng::seed_from_u64(9));
    let probe = |t: &GanTrainer| discriminator_loss(&t.gan.discriminator, &t.gan.generator, &real, &noise).0;
    let mut losses = vec![probe(&trainer)];
    for _ in 0..200 {
        trainer.d_step(&real);
        losses.push(probe(&trainer));
    }
    let head: f64 = losses[..10].iter().sum::<f64>() / 10.0;
    let tail: f64 = losses[losses.len() - 10..].iter().sum::<f64>() / 10.0;
    assert!(tail < 0.5 * head, "loss went {head} -> {tail}");
    let falling = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(falling as f64 >= 0.8 * 200.0, "{falling}/200 steps decreased");
}

#[test]
fn mixture_moments_matched() {
    let real = common::gmm_fixture(1000, 77);
    let mut hits = 0;
    for seed in 0..4 {
        let gan = train_gan(
            &real,
            &GanTrainConfig {
                seed,
                ..GanTrainConfig::default()
            },
        )
        .unwrap();
        let fake = generate_rows(&gan.generator, gan.noise_dim, 2000, seed + 50);
        let (m, c) = common::moment_errors(&real, &fake);
        eprintln!("seed {seed}: mean {m:.4} cov {c:.4}");
        if m <= 0.1 && c <= 0.3 {
            hits += 1;
        }
    }
    assert!(hits >= 3, "moments matched on {hits}/4 seeds");
}
