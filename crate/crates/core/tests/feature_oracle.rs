mod common;

use proptest::prelude::*;
use touchauth::data::{SwipeGesture, TouchEvent};
use touchauth::features::{extract_features, feature_index, FEATURE_COUNT, FEATURE_NAMES};

#[test]
fn matches_brute_force_extractor() {
    let swipes = common::sample_swipes(100, 21);
    assert_eq!(swipes.len(), 100);
    for s in &swipes {
        let got = extract_features(s).unwrap().values;
        let want = common::oracle::features(s);
        assert_eq!(got.len(), FEATURE_COUNT);
        assert_eq!(want.len(), FEATURE_COUNT);
        for i in 0..FEATURE_COUNT {
            assert!(
                common::close(got[i], want[i], 1e-9),
                "{} feature {}: {} vs {}",
                s.swipe_id,
                FEATURE_NAMES[i],
                got[i],
                want[i]
            );
        }
    }
}

fn swipe_from(points: &[(f64, f64, f64)]) -> SwipeGesture {
    SwipeGesture {
        user_id: "u".into(),
        dataset_id: "d".into(),
        swipe_id: "s".into(),
        events: points
            .iter()
            .map(|&(x, y, t)| TouchEvent::new(x, y, t, 2.0, 1.0))
            .collect(),
    }
}

fn arb_swipe() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0..1000.0f64, 0.0..2000.0f64, 1.0..40.0f64), 6..40).prop_map(|v| {
        let mut t = 0.0;
        v.into_iter()
            .map(|(x, y, dt)| {
                t += dt;
                (x, y, t)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn displacement_and_length_scale_with_coordinates(pts in arb_swipe(), s in 0.1..10.0f64) {
        let a = extract_features(&swipe_from(&pts)).unwrap().values;
        let scaled: Vec<_> = pts.iter().map(|&(x, y, t)| (x * s, y * s, t)).collect();
        let b = extract_features(&swipe_from(&scaled)).unwrap().values;
        for name in ["dp", "l"] {
            let i = feature_index(name).unwrap();
            prop_assert!(common::close(b[i], s * a[i], 1e-12), "{name}");
        }
    }

    #[test]
    fn time_shift_leaves_features_unchanged(pts in arb_swipe(), shift in -1e5..1e5f64) {
        let a = extract_features(&swipe_from(&pts)).unwrap().values;
        let moved: Vec<_> = pts.iter().map(|&(x, y, t)| (x, y, t + shift)).collect();
        let b = extract_features(&swipe_from(&moved)).unwrap().values;
        // differences of shifted timestamps carry rounding of order ulp(|t|)
        for i in 0..FEATURE_COUNT {
            prop_assert!(common::close(a[i], b[i], 1e-6), "{}: {} vs {}", FEATURE_NAMES[i], a[i], b[i]);
        }
    }

    #[test]
    fn palindromic_swipe_reversal(half in prop::collection::vec((0.0..500.0f64, 0.0..500.0f64), 3..15)) {
        // spatial palindrome with evenly spaced timestamps
        let mut pts: Vec<(f64, f64)> = half.clone();
        pts.extend(half.iter().rev());
        let fwd: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| (x, y, 10.0 * i as f64)).collect();
        let rev: Vec<_> = pts.iter().rev().enumerate().map(|(i, &(x, y))| (x, y, 10.0 * i as f64)).collect();
        let a = extract_features(&swipe_from(&fwd)).unwrap().values;
        let b = extract_features(&swipe_from(&rev)).unwrap().values;
        for name in ["dp", "l", "area"] {
            let i = feature_index(name).unwrap();
            prop_assert!(common::close(a[i], b[i], 1e-12), "{name}");
        }
    }
}
