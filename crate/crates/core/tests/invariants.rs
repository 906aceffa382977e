mod common;

use common::adasyn_oracle;

use proptest::prelude::*;
use touchauth::attacks::ScenarioKind;
use touchauth::classifiers::Architecture;
use touchauth::classifiers::{rates_at, select_threshold_eer};
use touchauth::data::Gender;
use touchauth::evaluation::{
    fairness_by_group, group_gap, kde_density, silverman_bandwidth, trapezoid_integral, EvalReport, Grouping,
};
use touchauth::features::{build_windows, mutual_information, window_count, FeatureVector, Normalizer, WindowLabel};

fn vectors(n: usize) -> Vec<FeatureVector> {
    (0..n)
        .map(|i| FeatureVector {
            values: vec![i as f64; 47],
            user_id: "u".into(),
            swipe_id: format!("s{i}"),
            timestamp: i as f64,
        })
        .collect()
}

#[test]
fn window_count_exhaustive() {
    for n in 0..=30 {
        let v = vectors(n);
        for p in 1..=30 {
            for q in 1..=30 {
                let w = build_windows(&v, p, q, WindowLabel::Genuine);
                let expected = if n >= p { (n - p) / q + 1 } else { 0 };
                assert_eq!(w.len(), expected, "n={n} p={p} q={q}");
                assert_eq!(window_count(n, p, q), expected);
                for (i, win) in w.iter().enumerate() {
                    assert_eq!(win.values.len(), 47 * p);
                    // window i starts at swipe i*q and runs in time order
                    assert_eq!(win.values[0], (i * q) as f64);
                    assert_eq!(win.values[47 * (p - 1)], (i * q + p - 1) as f64);
                }
            }
        }
    }
    assert_eq!(
        build_windows(&vectors(10), 5, 1, WindowLabel::Genuine)[0].values.len(),
        235
    );
}

#[test]
fn adasyn_toy_instance() {
    let (rows, labels) = adasyn_oracle::toy_instance();
    adasyn_oracle::check_adasyn(&rows, &labels, 3, 1).unwrap();
}

proptest! {
    #[test]
    fn adasyn_matches_oracle(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 12..50),
        minority_share in 0.1..0.45f64,
        seed in any::<u64>(),
    ) {
        let n = pts.len();
        let m = ((n as f64 * minority_share) as usize).max(4);
        let rows: Vec<Vec<f64>> = pts.iter().map(|&(a, b, c)| vec![a, b, c]).collect();
        let labels: Vec<bool> = (0..n).map(|i| i < m).collect();
        adasyn_oracle::check_adasyn(&rows, &labels, 3, seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn normalizer_output_in_unit_interval(
        train in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 4), 1..30),
        test in prop::collection::vec(-1e4..1e4f64, 4),
    ) {
        let norm = Normalizer::fit(train.iter().map(Vec::as_slice)).unwrap();
        for row in train.iter().chain(std::iter::once(&test)) {
            prop_assert!(norm.apply(row).iter().all(|v| (0.0..=1.0).contains(v)));
        }
        prop_assert!(norm.mins.iter().zip(&norm.maxs).all(|(lo, hi)| hi >= lo));
    }

    #[test]
    fn mutual_information_negation_invariant(
        col in prop::collection::vec(-5i32..5, 10..80),
        flips in prop::collection::vec(any::<bool>(), 80),
    ) {
        let x: Vec<f64> = col.iter().map(|&v| f64::from(v)).collect();
        let mut y: Vec<bool> = flips[..x.len()].to_vec();
        y[0] = true;
        y[1] = false;
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = mutual_information(&x, &y).unwrap();
        let b = mutual_information(&neg, &y).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn eer_threshold_invariant_under_increasing_transform(
        g in prop::collection::vec(0.0..1.0f64, 1..30),
        i in prop::collection::vec(0.0..1.0f64, 1..30),
    ) {
        let a = select_threshold_eer(&g, &i).unwrap();
        let f = |s: f64| (3.0 * s).exp();
        let tg: Vec<f64> = g.iter().map(|&s| f(s)).collect();
        let ti: Vec<f64> = i.iter().map(|&s| f(s)).collect();
        let b = select_threshold_eer(&tg, &ti).unwrap();
        prop_assert_eq!((a.far, a.frr), (b.far, b.frr));
        prop_assert_eq!(a.eer, b.eer);
    }

    #[test]
    fn raising_threshold_is_monotone(
        g in prop::collection::vec(0.0..1.0f64, 1..30),
        i in prop::collection::vec(0.0..1.0f64, 1..30),
        t1 in 0.0..1.0f64,
        t2 in 0.0..1.0f64,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let mut gs = g.clone();
        let mut is = i.clone();
        gs.sort_by(f64::total_cmp);
        is.sort_by(f64::total_cmp);
        let (far_lo, frr_lo) = rates_at(&gs, &is, lo);
        let (far_hi, frr_hi) = rates_at(&gs, &is, hi);
        prop_assert!(far_hi <= far_lo);
        prop_assert!(frr_hi >= frr_lo);
    }

    #[test]
    fn kde_integrates_to_one(
        unit in prop::collection::vec(0.0..1.0f64, 2..60),
        grid in 64usize..512,
        bw in prop::option::of(0.01..20.0f64),
        fill in 0.05..1.0f64,
    ) {
        // scale the sample spread so the grid step never exceeds the bandwidth
        let span = match bw {
            Some(h) => h * (grid as f64 - 9.0) * fill,
            None => 100.0 * fill,
        };
        let samples: Vec<f64> = unit.iter().map(|u| u * span).collect();
        let curve = kde_density(&samples, grid, bw).unwrap();
        prop_assume!(curve.grid[1] - curve.grid[0] <= curve.bandwidth);
        prop_assert!(curve.density.iter().all(|&d| d >= 0.0));
        prop_assert!((trapezoid_integral(&curve) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fairness_gap_symmetric(
        a in prop::collection::vec(0.0..1.0f64, 2..10),
        b in prop::collection::vec(0.0..1.0f64, 2..10),
    ) {
        let mk = |h: f64, g: Gender, i: usize| EvalReport {
            model_id: format!("{}{i}", g.as_str()),
            classifier: "mlp".into(),
            architecture: Architecture::V,
            scenario: ScenarioKind::Random,
            far: h,
            frr: h,
            hter: h,
            gender: g,
            dataset_ids: vec![],
            seed: 0,
        };
        let one: Vec<EvalReport> = a.iter().enumerate().map(|(i, &h)| mk(h, Gender::Male, i))
            .chain(b.iter().enumerate().map(|(i, &h)| mk(h, Gender::Female, i))).collect();
        let two: Vec<EvalReport> = a.iter().enumerate().map(|(i, &h)| mk(h, Gender::Female, i))
            .chain(b.iter().enumerate().map(|(i, &h)| mk(h, Gender::Male, i))).collect();
        let g1 = fairness_by_group(&one, Grouping::Gender).unwrap()[0].gap;
        let g2 = fairness_by_group(&two, Grouping::Gender).unwrap()[0].gap;
        prop_assert_eq!(g1, g2);
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        prop_assert_eq!(group_gap(&[ma, mb]), group_gap(&[mb, ma]));
    }
}

#[test]
fn kde_matches_direct_kernel_sum() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(50);
    let samples: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut r)).collect();
    let curve = kde_density(&samples, 200, None).unwrap();
    let h = silverman_bandwidth(&samples);
    assert_eq!(curve.bandwidth, h);
    for idx in [0, 13, 27, 50, 77, 99, 120, 151, 180, 199] {
        let x = curve.grid[idx];
        let mut sum = 0.0;
        for s in &samples {
            let z = (x - s) / h;
            sum += (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        }
        let direct = sum / (samples.len() as f64 * h);
        assert!(
            common::close(curve.density[idx], direct, 1e-12),
            "{} vs {direct}",
            curve.density[idx]
        );
    }
}
