use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Stratified fold assignment over a fixed set of training rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    pub assignment: Vec<usize>,
}

impl CvPlan {
    /// Shuffles each class with the seed and deals it round-robin, so every
    /// fold holds `floor` or `ceil` of its share of each class.
    pub fn stratified(labels: &[bool], folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::invalid("cross-validation needs at least 2 folds"));
        }
        let mut assignment = vec![0; labels.len()];
        let mut next = 0;
        for (tag, class) in [true, false].into_iter().enumerate() {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            idx.shuffle(&mut rng::stream(seed, &[0xC5, tag as u64]));
            for i in idx {
                assignment[i] = next;
                next = (next + 1) % folds;
            }
        }
        Ok(Self { folds, assignment })
    }

    /// `(train indices, held-out indices)` of one fold.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignment.len()).partition(|&i| self.assignment[i] != fold)
    }

    pub fn check_classes(&self, labels: &[bool]) -> Result<()> {
        for fold in 0..self.folds {
            let (train, test) = self.split(fold);
            let has_both = |idx: &[usize]| idx.iter().any(|&i| labels[i]) && idx.iter().any(|&i| !labels[i]);
            if !has_both(&train) || !has_both(&test) {
                return Err(Error::SingleClassFold(fold));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_metrics: Vec<f64>,
    pub mean: f64,
}

/// Trains on k-1 folds and evaluates `metric` on the held-out fold.
pub fn cross_validate<M, T, F>(
    rows: &[Vec<f64>],
    labels: &[bool],
    plan: &CvPlan,
    mut trainer: T,
    mut metric: F,
) -> Result<CvResult>
where
    T: FnMut(&[Vec<f64>], &[bool], usize) -> Result<M>,
    F: FnMut(&M, &[Vec<f64>], &[bool]) -> Result<f64>,
{
    if plan.assignment.len() != rows.len() || rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: plan.assignment.len(),
            got: rows.len(),
        });
    }
    plan.check_classes(labels)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
        (
            idx.iter().map(|&i| rows[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let mut fold_metrics = Vec::with_capacity(plan.folds);
    for fold in 0..plan.folds {
        let (train, test) = plan.split(fold);
        let (tx, ty) = pick(&train);
        let (vx, vy) = pick(&test);
        let model = trainer(&tx, &ty, fold)?;
        fold_metrics.push(metric(&model, &vx, &vy)?);
    }
    let mean = fold_metrics.iter().sum::<f64>() / fold_metrics.len() as f64;
    Ok(CvResult { fold_metrics, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_row_held_out_once() {
        let labels: Vec<bool> = (0..100).map(|i| i % 3 == 0).collect();
        let plan = CvPlan::stratified(&labels, 5, 11).unwrap();
        let mut seen = vec![0; 100];
        for f in 0..5 {
            for i in plan.split(f).1 {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn constant_trainer_mean_matches_direct() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let labels: Vec<bool> = (0..50).map(|i| i % 5 == 0).collect();
        let plan = CvPlan::stratified(&labels, 5, 2).unwrap();
        // constant "accept everything" model; metric = fraction of impostors
        let res = cross_validate(
            &rows,
            &labels,
            &plan,
            |_, _, _| Ok(()),
            |_, _, y| Ok(y.iter().filter(|&&l| !l).count() as f64 / y.len() as f64),
        )
        .unwrap();
        assert_eq!(res.fold_metrics.len(), 5);
        assert!((res.mean - 0.8).abs() < 1e-12);
    }

    #[test]
    fn single_class_fold_rejected() {
        let labels: Vec<bool> = (0..20).map(|i| i < 2).collect();
        let plan = CvPlan::stratified(&labels, 5, 0).unwrap();
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let r = cross_validate(&rows, &labels, &plan, |_, _, _| Ok(()), |_, _, _| Ok(0.0));
        assert!(matches!(r, Err(Error::SingleClassFold(_))));
        assert!(CvPlan::stratified(&labels, 1, 0).is_err());
    }
}
