//! ADASYN oversampling of the minority class.
//!
//! Every minority sample receives a share of the synthetic budget
//! proportional to the fraction of majority points among its `k` nearest
//! neighbours. Synthetics are drawn on the segment between the sample and a
//! random one of its `k` nearest minority neighbours.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdasynConfig {
    pub k: usize,
    /// Desired balance level after generation, in (0, 1].
    pub beta: f64,
    pub seed: u64,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        Self {
            k: 5,
            beta: 1.0,
            seed: 0,
        }
    }
}

/// Where a synthetic sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    /// Index of the minority sample in the input.
    pub base: usize,
    /// Index of the minority neighbour in the input.
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdasynOutput {
    /// Input rows followed by the synthetic rows.
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub minority_label: bool,
    /// Synthetic count per minority sample, in input order of the minority.
    pub per_sample: Vec<usize>,
    pub origins: Vec<SyntheticOrigin>,
    /// Set when no minority sample had a majority neighbour.
    pub skipped: bool,
}

impl AdasynOutput {
    pub fn synthetic_count(&self) -> usize {
        self.origins.len()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest rows to `rows[query]` among `candidates`
/// (excluding the query itself). Ties are broken by index.
fn nearest(rows: &[Vec<f64>], query: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let q = &rows[query];
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&i| i != query)
        .map(|&i| (sq_dist(q, &rows[i]), i))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    d.select_nth_unstable_by(k - 1, cmp);
    d.truncate(k);
    d.sort_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

/// Splits `total` into integer parts proportional to `weights` by the
/// largest-remainder rule (ties to the lower index), so the parts sum to
/// exactly `total`.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || total == 0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}

/// Oversamples the minority class of `(rows, labels)`.
pub fn adasyn_balance(rows: &[Vec<f64>], labels: &[bool], cfg: &AdasynConfig) -> Result<AdasynOutput> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: rows.len(),
        });
    }
    if cfg.k == 0 || !(cfg.beta > 0.0 && cfg.beta <= 1.0) {
        return Err(Error::invalid("ADASYN needs k >= 1 and beta in (0,1]"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let negatives = labels.len() - positives;
    let minority_label = positives <= negatives;
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority_label).collect();
    let (m_s, m_l) = (minority.len(), labels.len() - minority.len());

    let mut out = AdasynOutput {
        rows: rows.to_vec(),
        labels: labels.to_vec(),
        minority_label,
        per_sample: vec![0; m_s],
        origins: Vec::new(),
        skipped: false,
    };
    let budget = ((m_l - m_s) as f64 * cfg.beta).round() as usize;
    if budget == 0 {
        return Ok(out);
    }
    if m_s < cfg.k + 1 {
        return Err(Error::MinorityTooSmall {
            count: m_s,
            needed: cfg.k + 1,
        });
    }

    let all: Vec<usize> = (0..rows.len()).collect();
    let ratios: Vec<f64> = minority
        .iter()
        .map(|&i| {
            let nn = nearest(rows, i, &all, cfg.k);
            let majority = nn.iter().filter(|&&j| labels[j] != minority_label).count();
            majority as f64 / cfg.k as f64
        })
        .collect();
    if ratios.iter().all(|&r| r == 0.0) {
        out.skipped = true;
        return Ok(out);
    }
    out.per_sample = apportion(&ratios, budget);

    for (slot, (&base, &g)) in minority.iter().zip(&out.per_sample).enumerate() {
        if g == 0 {
            continue;
        }
        let neighbors = nearest(rows, base, &minority, cfg.k);
        let mut r = rng::stream(cfg.seed, &[0xADA5, slot as u64]);
        for _ in 0..g {
            let neighbor = neighbors[r.random_range(0..neighbors.len())];
            let lambda: f64 = r.random();
            let synthetic: Vec<f64> = rows[base]
                .iter()
                .zip(&rows[neighbor])
                .map(|(x, z)| x + lambda * (z - x))
                .collect();
            out.rows.push(synthetic);
            out.labels.push(minority_label);
            out.origins.push(SyntheticOrigin { base, neighbor, lambda });
        }
    }
    Ok(out)
}

/// Neighbour lists used by [`adasyn_balance`], exposed for inspection:
/// `(all-class neighbours, minority neighbours)` per minority sample.
pub fn adasyn_neighbors(rows: &[Vec<f64>], labels: &[bool], k: usize) -> Vec<(usize, Vec<usize>, Vec<usize>)> {
    let positives = labels.iter().filter(|&&l| l).count();
    let minority_label = positives <= labels.len() - positives;
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority_label).collect();
    let all: Vec<usize> = (0..rows.len()).collect();
    minority
        .iter()
        .map(|&i| (i, nearest(rows, i, &all, k), nearest(rows, i, &minority, k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_input_passes_through() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let labels = vec![true, false, true, false];
        let out = adasyn_balance(&rows, &labels, &AdasynConfig::default()).unwrap();
        assert_eq!(out.rows, rows);
        assert_eq!(out.synthetic_count(), 0);
    }

    #[test]
    fn isolated_minority_cluster_contributes_nothing() {
        // minority cluster far from every majority point
        let mut rows: Vec<Vec<f64>> = (0..4).map(|i| vec![100.0 + i as f64 * 0.1]).collect();
        let mut labels = vec![true; 4];
        rows.push(vec![0.5]);
        labels.push(true);
        rows.extend((0..10).map(|i| vec![i as f64 * 0.1]));
        labels.extend(std::iter::repeat_n(false, 10));
        let cfg = AdasynConfig {
            k: 3,
            beta: 1.0,
            seed: 4,
        };
        let out = adasyn_balance(&rows, &labels, &cfg).unwrap();
        assert_eq!(&out.per_sample[..4], &[0, 0, 0, 0]);
        assert_eq!(out.per_sample[4], 5);
        assert!(out.origins.iter().all(|o| o.base == 4));
    }

    #[test]
    fn all_minority_neighbors_skips() {
        let mut rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 * 0.01]).collect();
        rows.extend((0..8).map(|i| vec![50.0 + i as f64]));
        let mut labels = vec![true; 4];
        labels.extend(std::iter::repeat_n(false, 8));
        let out = adasyn_balance(
            &rows,
            &labels,
            &AdasynConfig {
                k: 3,
                beta: 1.0,
                seed: 0,
            },
        )
        .unwrap();
        assert!(out.skipped);
        assert_eq!(out.rows.len(), rows.len());
    }

    #[test]
    fn too_small_minority() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<bool> = (0..10).map(|i| i < 3).collect();
        assert!(matches!(
            adasyn_balance(
                &rows,
                &labels,
                &AdasynConfig {
                    k: 5,
                    beta: 1.0,
                    seed: 0
                }
            ),
            Err(Error::MinorityTooSmall { count: 3, needed: 6 })
        ));
        assert!(matches!(
            adasyn_balance(&rows, &[false; 10], &AdasynConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn apportion_sums_exactly() {
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(apportion(&[0.0, 2.0, 1.0], 7).iter().sum::<usize>(), 7);
        assert_eq!(apportion(&[0.0, 2.0, 1.0], 7)[0], 0);
    }
}
