//! Brute-force ADASYN reference checks.

use touchauth::balancing::{adasyn_balance, adasyn_neighbors, AdasynConfig};

macro_rules! ensure {
    ($cond:expr) => {
        if !$cond {
            return Err(format!("failed: {}", stringify!($cond)));
        }
    };
}

macro_rules! ensure_eq {
    ($a:expr, $b:expr) => {
        if $a != $b {
            return Err(format!(
                "{} != {}: {:?} vs {:?}",
                stringify!($a),
                stringify!($b),
                $a,
                $b
            ));
        }
    };
}

/// 10 majority and 4 minority points in 2-D, used with K = 3.
pub fn toy_instance() -> (Vec<Vec<f64>>, Vec<bool>) {
    let rows: Vec<Vec<f64>> = vec![
        vec![0.10, 0.10],
        vec![0.20, 0.15],
        vec![0.15, 0.30],
        vec![0.30, 0.20],
        vec![0.35, 0.40],
        vec![0.50, 0.10],
        vec![0.60, 0.30],
        vec![0.70, 0.60],
        vec![0.20, 0.60],
        vec![0.40, 0.70],
        vec![0.45, 0.45],
        vec![0.55, 0.50],
        vec![0.80, 0.80],
        vec![0.90, 0.85],
    ];
    let labels: Vec<bool> = (0..14).map(|i| i >= 10).collect();
    (rows, labels)
}

/// Exhaustive distance scan for the K nearest rows of `i` within `pool`.
pub fn brute_neighbours(rows: &[Vec<f64>], i: usize, pool: &[usize], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| {
            let s: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// True when `s` lies on the segment `a`..`b` within `tol`.
pub fn on_segment(s: &[f64], a: &[f64], b: &[f64], tol: f64) -> bool {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let lambda = if len2 == 0.0 {
        0.0
    } else {
        s.iter().zip(a).zip(&ab).map(|((s, a), d)| (s - a) * d).sum::<f64>() / len2
    };
    (-tol..=1.0 + tol).contains(&lambda)
        && s.iter()
            .zip(a)
            .zip(&ab)
            .all(|((s, a), d)| (s - (a + lambda * d)).abs() <= tol)
}

pub fn check_adasyn(rows: &[Vec<f64>], labels: &[bool], k: usize, seed: u64) -> Result<(), String> {
    let cfg = AdasynConfig { k, beta: 1.0, seed };
    let out = adasyn_balance(rows, labels, &cfg).unwrap();
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == out.minority_label).collect();
    let all: Vec<usize> = (0..labels.len()).collect();
    let m_s = minority.len();
    let m_l = labels.len() - m_s;

    // neighbour sets and per-sample counts against the brute-force scan
    let ratios: Vec<f64> = minority
        .iter()
        .map(|&i| {
            let nb = brute_neighbours(rows, i, &all, k);
            nb.iter().filter(|&&j| labels[j] != out.minority_label).count() as f64 / k as f64
        })
        .collect();
    for (slot, (i, all_nb, min_nb)) in adasyn_neighbors(rows, labels, k).into_iter().enumerate() {
        ensure_eq!(i, minority[slot]);
        ensure_eq!(all_nb, brute_neighbours(rows, i, &all, k));
        ensure_eq!(min_nb, brute_neighbours(rows, i, &minority, k));
    }
    let budget = (m_l - m_s) as f64;
    let total: f64 = ratios.iter().sum();
    if total == 0.0 {
        ensure!(out.skipped);
        ensure_eq!(out.synthetic_count(), 0);
    } else {
        ensure_eq!(out.synthetic_count() as f64, budget.round());
        for (slot, &r) in ratios.iter().enumerate() {
            let ideal = r / total * budget;
            ensure!((out.per_sample[slot] as f64 - ideal).abs() < 1.0);
        }
        // post-balance class sizes within one sample of the target
        let minority_after = out.labels.iter().filter(|&&l| l == out.minority_label).count();
        ensure!((minority_after as f64 - m_l as f64).abs() <= 1.0);
    }

    // originals untouched and every synthetic on a minority segment
    ensure_eq!(&out.rows[..rows.len()], rows);
    for (o, s) in out.origins.iter().zip(&out.rows[rows.len()..]) {
        let nb = brute_neighbours(rows, o.base, &minority, k);
        ensure!(nb.contains(&o.neighbor));
        ensure!(on_segment(s, &rows[o.base], &rows[o.neighbor], 1e-9));
    }
    ensure!(out.labels[rows.len()..].iter().all(|&l| l == out.minority_label));
    Ok(())
}
