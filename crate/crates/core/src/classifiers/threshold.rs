use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub tau: f64,
    pub eer: f64,
    pub far: f64,
    pub frr: f64,
}

/// FAR and FRR at threshold `tau` (accept iff score >= tau), given sorted
/// score lists.
pub fn rates_at(genuine_sorted: &[f64], impostor_sorted: &[f64], tau: f64) -> (f64, f64) {
    let rejected = genuine_sorted.partition_point(|&s| s < tau);
    let accepted = impostor_sorted.len() - impostor_sorted.partition_point(|&s| s < tau);
    (
        accepted as f64 / impostor_sorted.len() as f64,
        rejected as f64 / genuine_sorted.len() as f64,
    )
}

/// Equal-error-rate threshold. Candidates are every distinct score and the
/// midpoints between consecutive distinct scores; the one minimizing
/// `|FAR - FRR|` wins, ties to the smaller threshold.
pub fn select_threshold_eer(genuine: &[f64], impostor: &[f64]) -> Result<ThresholdChoice> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::EmptyList);
    }
    let sorted = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let (g, i) = (sorted(genuine), sorted(impostor));
    let mut distinct: Vec<f64> = g.iter().chain(&i).copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    let mut best: Option<(f64, ThresholdChoice)> = None;
    let mut consider = |tau: f64| {
        let (far, frr) = rates_at(&g, &i, tau);
        let gap = (far - frr).abs();
        if best.is_none_or(|(b, _)| gap < b) {
            best = Some((
                gap,
                ThresholdChoice {
                    tau,
                    eer: (far + frr) / 2.0,
                    far,
                    frr,
                },
            ));
        }
    };
    for (k, &s) in distinct.iter().enumerate() {
        consider(s);
        if let Some(&next) = distinct.get(k + 1) {
            consider(s + (next - s) / 2.0);
        }
    }
    Ok(best.expect("at least one candidate").1)
}
