use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{infer_type_constraints, KnowledgeGraph, Triple};
use crate::sampling::perturb_negatives;
use crate::seed;

use super::metrics::auc_pr;
use super::TripleScorer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub config: usize,
    pub fold: usize,
    pub auc_pr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub best: usize,
    pub mean_auc_pr: Vec<f64>,
    pub rows: Vec<CvRow>,
}

/// Fold index of each of `n` items: a seeded permutation dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::derive_rng(seed, "cv-folds"));
    let mut out = vec![0; n];
    for (pos, &item) in perm.iter().enumerate() {
        out[item] = pos % folds;
    }
    out
}

/// K-fold cross-validation over `grid`, selecting the configuration with the
/// highest mean validation AUC-PR (lowest index on ties).
///
/// `fit(config, training_triples, seed)` builds a scorer from the other folds. Each
/// held-out positive is scored against one subject and one object perturbation
/// that avoids every positive of `kg`.
pub fn cross_validate<C, F>(kg: &KnowledgeGraph, grid: &[C], folds: usize, seed: u64, mut fit: F) -> Result<CvReport>
where
    F: FnMut(&C, &[Triple], u64) -> Result<Box<dyn TripleScorer>>,
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    if kg.len() < folds {
        return Err(Error::InvalidSplit(format!("{} triples cannot fill {folds} folds", kg.len())));
    }
    let assign = fold_assignment(kg.len(), folds, seed);
    let constraints = infer_type_constraints(kg);
    let neg_seed = seed::derive_seed(seed, "cv-negatives");
    let mut rows = Vec::new();
    for fold in 0..folds {
        let (mut train, mut held) = (Vec::new(), Vec::new());
        for (t, &f) in kg.triples().iter().zip(&assign) {
            if f == fold { held.push(*t) } else { train.push(*t) }
        }
        let negatives: Vec<Triple> =
            held.iter().flat_map(|&t| perturb_negatives(kg, t, 1, &constraints, neg_seed)).map(|n| n.triple).collect();
        let labels: Vec<bool> = held.iter().map(|_| true).chain(negatives.iter().map(|_| false)).collect();
        for (ci, config) in grid.iter().enumerate() {
            let scorer = fit(config, &train, seed::derive_seed(seed, &format!("cv-fit-{fold}")))?;
            let scores: Vec<f64> = held.iter().chain(&negatives).map(|&t| scorer.score_triple(t)).collect();
            rows.push(CvRow { config: ci, fold, auc_pr: auc_pr(&scores, &labels)? });
        }
    }
    let mean_auc_pr: Vec<f64> = (0..grid.len())
        .map(|ci| rows.iter().filter(|r| r.config == ci).map(|r| r.auc_pr).sum::<f64>() / folds as f64)
        .collect();
    let best = (0..grid.len()).fold(0, |b, ci| if mean_auc_pr[ci] > mean_auc_pr[b] { ci } else { b });
    Ok(CvReport { best, mean_auc_pr, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::train::FnScorer;

    #[test]
    fn folds_are_balanced_and_reproducible() {
        let a = fold_assignment(23, 4, 9);
        assert_eq!(a, fold_assignment(23, 4, 9));
        for f in 0..4 {
            let c = a.iter().filter(|&&x| x == f).count();
            assert!(c == 5 || c == 6);
        }
    }

    #[test]
    fn single_config_is_returned_and_empty_grid_fails() {
        let kg = synth::random_graph(10, 2, 30, 1);
        let report = cross_validate(&kg, &[()], 3, 0, |_, _, _| Ok(Box::new(FnScorer(|_: Triple| 0.0)))).unwrap();
        assert_eq!(report.best, 0);
        assert_eq!(report.rows.len(), 3);
        let empty: [(); 0] = [];
        assert!(cross_validate(&kg, &empty, 3, 0, |_, _, _| Ok(Box::new(FnScorer(|_: Triple| 0.0)))).is_err());
    }

    #[test]
    fn dominant_config_wins() {
        let kg = synth::random_graph(12, 2, 40, 2);
        let truth = kg.clone();
        let report = cross_validate(&kg, &[false, true], 4, 5, |&oracle, _, _| {
            let truth = truth.clone();
            Ok(Box::new(FnScorer(move |t: Triple| if oracle && truth.contains(&t) { 1.0 } else { 0.0 })))
        })
        .unwrap();
        assert_eq!(report.best, 1);
        for fold in 0..4 {
            let at = |c| report.rows.iter().find(|r| r.config == c && r.fold == fold).unwrap().auc_pr;
            assert!(at(1) > at(0));
        }
    }
}
