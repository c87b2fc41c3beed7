//! Stratified nested cross-validation over (depth, γ, C).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::{class_list, fit_kernel, predict_kernel, sq_distances, Standardizer, SvmParams};
use super::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvPlan {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub gammas: Vec<f64>,
    pub cs: Vec<f64>,
    pub seed: u64,
    /// Per-column standardization with training-fold statistics before
    /// the kernel.
    pub standardize: bool,
}

impl CvPlan {
    /// γ ∈ {0.001, 0.005, 0.01, 0.02, 0.04}, C ∈ {50, 100, 250, 400, 500}.
    pub fn mesh_tasks(seed: u64) -> Self {
        Self {
            outer_folds: 5,
            inner_folds: 5,
            gammas: vec![0.001, 0.005, 0.01, 0.02, 0.04],
            cs: vec![50.0, 100.0, 250.0, 400.0, 500.0],
            seed,
            standardize: true,
        }
    }

    /// γ ∈ {1e-5, 1e-4, 1e-3}, C ∈ {25, 100, 250, 500}.
    pub fn digit_tasks(seed: u64) -> Self {
        Self {
            outer_folds: 5,
            inner_folds: 5,
            gammas: vec![0.00001, 0.0001, 0.001],
            cs: vec![25.0, 100.0, 250.0, 500.0],
            seed,
            standardize: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if self.gammas.is_empty() || self.cs.is_empty() {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        if self.gammas.iter().chain(&self.cs).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_size: usize,
    pub accuracy: f64,
    /// Index into the candidate feature sets.
    pub depth: usize,
    pub gamma: f64,
    pub c: f64,
    pub inner_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub plan: CvPlan,
    pub num_samples: usize,
    pub classes: Vec<usize>,
    pub depth_candidates: usize,
    pub feature_scaling: String,
    pub folds: Vec<FoldReport>,
    /// How often each candidate depth was selected.
    pub depth_selections: Vec<usize>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

impl CvReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fold id of every sample: each class is shuffled with `seed` and dealt
/// round-robin, continuing the deal across classes so fold sizes differ by
/// at most one.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for cls in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == cls).collect();
        if idx.len() < folds {
            return Err(Error::Training(format!(
                "class {cls} has {} samples, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            out[i] = next % folds;
            next += 1;
        }
    }
    Ok(out)
}

struct Split<'a> {
    train: &'a [usize],
    test: &'a [usize],
}

/// Squared distances train×train and test×train after optional
/// standardization fitted on the training rows.
fn split_distances(features: &FeatureMatrix, split: &Split<'_>, standardize: bool) -> (Vec<f64>, Vec<f64>) {
    let pick = |idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|&i| features.rows()[i].clone()).collect() };
    let mut train = pick(split.train);
    let mut test = pick(split.test);
    if standardize {
        let s = Standardizer::fit(&train);
        train = train.iter().map(|r| s.transform(r)).collect();
        test = test.iter().map(|r| s.transform(r)).collect();
    }
    (sq_distances(&train, &train), sq_distances(&test, &train))
}

fn evaluate(dist: &(Vec<f64>, Vec<f64>), labels: &[usize], split: &Split<'_>, gamma: f64, c: f64) -> Result<f64> {
    let ytr: Vec<usize> = split.train.iter().map(|&i| labels[i]).collect();
    let classes = class_list(&ytr)?;
    let k: Vec<f64> = dist.0.iter().map(|d| (-gamma * d).exp()).collect();
    let params = SvmParams::new(gamma, c);
    let sol = fit_kernel(&k, &ytr, &classes, &params);
    let kt: Vec<f64> = dist.1.iter().map(|d| (-gamma * d).exp()).collect();
    let pred = predict_kernel(&kt, split.train.len(), &sol, &classes);
    let hits = pred.iter().zip(split.test).filter(|(p, &i)| **p == labels[i]).count();
    Ok(hits as f64 / split.test.len() as f64)
}

fn fold_splits(ids: &[usize], folds: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..ids.len()).partition(|&i| ids[i] == f);
            (train, test)
        })
        .collect()
}

/// Nested cross-validation. Each entry of `feature_sets` is one candidate
/// depth for the same samples. Inner folds pick (depth, γ, C) by mean
/// accuracy; ties go to the lowest depth, then the earliest grid entry.
pub fn nested_cv(feature_sets: &[FeatureMatrix], labels: &[usize], plan: &CvPlan) -> Result<CvReport> {
    plan.validate()?;
    if feature_sets.is_empty() {
        return Err(Error::Config("no feature sets".into()));
    }
    if let Some(f) = feature_sets.iter().find(|f| f.num_rows() != labels.len()) {
        return Err(Error::Training(format!(
            "feature set has {} rows for {} labels",
            f.num_rows(),
            labels.len()
        )));
    }
    let classes = class_list(labels)?;
    let outer = stratified_folds(labels, plan.outer_folds, plan.seed)?;
    let grid: Vec<(f64, f64)> = plan
        .gammas
        .iter()
        .flat_map(|&g| plan.cs.iter().map(move |&c| (g, c)))
        .collect();

    let mut folds = Vec::with_capacity(plan.outer_folds);
    for (fold, (train, test)) in fold_splits(&outer, plan.outer_folds).into_iter().enumerate() {
        let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let inner_ids = stratified_folds(&ytr, plan.inner_folds, plan.seed.wrapping_add(1 + fold as u64))?;
        let inner: Vec<(Vec<usize>, Vec<usize>)> = fold_splits(&inner_ids, plan.inner_folds)
            .into_iter()
            .map(|(a, b)| {
                (
                    a.iter().map(|&i| train[i]).collect(),
                    b.iter().map(|&i| train[i]).collect(),
                )
            })
            .collect();

        let mut scores = vec![vec![0.0; grid.len()]; feature_sets.len()];
        for (d, fs) in feature_sets.iter().enumerate() {
            for (itr, ite) in &inner {
                let split = Split { train: itr, test: ite };
                let dist = split_distances(fs, &split, plan.standardize);
                let acc: Vec<f64> = grid
                    .par_iter()
                    .map(|&(g, c)| evaluate(&dist, labels, &split, g, c))
                    .collect::<Result<_>>()?;
                for (s, a) in scores[d].iter_mut().zip(acc) {
                    *s += a / inner.len() as f64;
                }
            }
        }
        let mut best = (0, 0);
        for (d, row) in scores.iter().enumerate() {
            for (g, &s) in row.iter().enumerate() {
                if s > scores[best.0][best.1] {
                    best = (d, g);
                }
            }
        }
        let (gamma, c) = grid[best.1];
        let split = Split {
            train: &train,
            test: &test,
        };
        let dist = split_distances(&feature_sets[best.0], &split, plan.standardize);
        folds.push(FoldReport {
            fold,
            test_size: test.len(),
            accuracy: evaluate(&dist, labels, &split, gamma, c)?,
            depth: best.0,
            gamma,
            c,
            inner_accuracy: scores[best.0][best.1],
        });
    }

    let n = folds.len() as f64;
    let mean = folds.iter().map(|f| f.accuracy).sum::<f64>() / n;
    let var = folds.iter().map(|f| (f.accuracy - mean).powi(2)).sum::<f64>() / n;
    let mut depth_selections = vec![0; feature_sets.len()];
    for f in &folds {
        depth_selections[f.depth] += 1;
    }
    Ok(CvReport {
        plan: plan.clone(),
        num_samples: labels.len(),
        classes,
        depth_candidates: feature_sets.len(),
        feature_scaling: if plan.standardize {
            "per-column standardization fitted on each training fold".into()
        } else {
            "none".into()
        },
        folds,
        depth_selections,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ColumnLabel;
    use crate::scattering::Path;
    use rand_distr::{Distribution, StandardNormal};

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let d = rows[0].len();
        let manifest = (0..d)
            .map(|j| ColumnLabel {
                signal: j,
                path: Path::empty(),
                point: None,
            })
            .collect();
        FeatureMatrix::new(rows, manifest).unwrap()
    }

    fn blobs(per_class: usize, spread: f64, seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[0.0, 0.0, 0.0], [6.0, 0.0, 1.0], [0.0, 6.0, -1.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for _ in 0..per_class {
                rows.push(
                    ctr.iter()
                        .map(|m| m + spread * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                        .collect(),
                );
                labels.push(c);
            }
        }
        (matrix(rows), labels)
    }

    fn small_plan(seed: u64) -> CvPlan {
        CvPlan {
            outer_folds: 5,
            inner_folds: 3,
            gammas: vec![0.1, 1.0],
            cs: vec![1.0, 10.0],
            seed,
            standardize: true,
        }
    }

    #[test]
    fn folds_are_stratified_partitions() {
        let labels: Vec<usize> = (0..53).map(|i| i % 3).collect();
        let ids = stratified_folds(&labels, 5, 2).unwrap();
        for f in 0..5 {
            let size = ids.iter().filter(|&&x| x == f).count();
            assert!((10..=11).contains(&size));
            for c in 0..3 {
                let k = (0..53).filter(|&i| ids[i] == f && labels[i] == c).count();
                assert!((3..=4).contains(&k));
            }
        }
        assert_eq!(ids, stratified_folds(&labels, 5, 2).unwrap());
        assert!(stratified_folds(&[0, 0, 1], 2, 0).is_err());
    }

    #[test]
    fn separable_blobs_score_perfectly() {
        let (x, y) = blobs(15, 0.3, 1);
        let r = nested_cv(&[x], &y, &small_plan(7)).unwrap();
        assert_eq!(r.mean_accuracy, 1.0);
        assert_eq!(r.folds.iter().map(|f| f.test_size).sum::<usize>(), 45);
    }

    #[test]
    fn shuffled_labels_give_chance() {
        let (x, mut y) = blobs(40, 0.3, 2);
        y.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        let r = nested_cv(&[x], &y, &small_plan(3)).unwrap();
        let n = y.len() as f64;
        let sigma = (1.0 / 3.0 * (2.0 / 3.0) / n).sqrt();
        assert!(
            (r.mean_accuracy - 1.0 / 3.0).abs() <= 3.0 * sigma,
            "{}",
            r.mean_accuracy
        );
    }

    #[test]
    fn duplicate_depth_candidates_pick_lowest() {
        let (x, y) = blobs(10, 1.5, 4);
        let r = nested_cv(&[x.clone(), x], &y, &small_plan(1)).unwrap();
        assert_eq!(r.depth_selections, vec![5, 0]);
    }

    #[test]
    fn deterministic_report() {
        let (x, y) = blobs(10, 2.0, 6);
        let a = nested_cv(&[x.clone()], &y, &small_plan(9)).unwrap().to_json();
        let b = nested_cv(&[x], &y, &small_plan(9)).unwrap().to_json();
        assert_eq!(a, b);
        let back: CvReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back.to_json(), a);
    }

    #[test]
    fn plan_errors() {
        let (x, y) = blobs(3, 1.0, 0);
        let mut p = small_plan(0);
        p.outer_folds = 1;
        assert!(nested_cv(&[x.clone()], &y, &p).is_err());
        assert!(matches!(nested_cv(&[x], &y, &small_plan(0)), Err(Error::Training(_))));
        let grids = CvPlan::digit_tasks(0);
        assert_eq!(grids.gammas.len() * grids.cs.len(), 12);
    }
}
