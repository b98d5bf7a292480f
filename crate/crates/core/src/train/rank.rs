use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, Slot, Triple, TypeConstraints};

use super::metrics::{auc_pr, auc_roc, mrr};
use super::TripleScorer;

/// Rank of the true entity in slot `slot` of `t` among its corruptions.
///
/// Candidates are the entities admitted by `constraints` for that slot (every
/// entity when `None`), always including the true one. With `filtered`, a
/// corruption that is itself a positive of `known` is dropped. Scores are ranked
/// descending; ties share the mid-rank.
pub fn rank_entities<S: TripleScorer + ?Sized>(
    scorer: &S,
    known: &KnowledgeGraph,
    constraints: Option<&TypeConstraints>,
    t: Triple,
    slot: Slot,
    filtered: bool,
) -> f64 {
    let truth = slot.of(&t);
    let target = scorer.score_triple(t);
    let mut above = 0usize;
    let mut ties = 0usize;
    let mut visit = |e: EntityId| {
        if e == truth {
            return;
        }
        let c = slot.replace(t, e);
        if filtered && known.contains(&c) {
            return;
        }
        let s = scorer.score_triple(c);
        if s > target {
            above += 1;
        } else if s == target {
            ties += 1;
        }
    };
    match constraints {
        Some(tc) => tc.candidates(t.relation, slot).iter().copied().for_each(&mut visit),
        None => (0..known.num_entities() as u32).map(EntityId).for_each(&mut visit),
    }
    1.0 + above as f64 + ties as f64 / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub filtered: bool,
    /// Rank the subject as well as the object.
    pub both_sides: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { filtered: true, both_sides: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleRanks {
    pub triple: Triple,
    pub object_rank: f64,
    pub subject_rank: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub filtered: bool,
    pub ranks: Vec<TripleRanks>,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
    /// Present when negatives were supplied.
    pub auc_roc: Option<f64>,
    pub auc_pr: Option<f64>,
}

impl RankingReport {
    pub fn all_ranks(&self) -> Vec<f64> {
        self.ranks.iter().flat_map(|r| std::iter::once(r.object_rank).chain(r.subject_rank)).collect()
    }
}

/// Rank every test triple and, when `negatives` is non-empty, score the test
/// positives against them for AUC-ROC and AUC-PR.
///
/// `known` holds every positive that filtering should remove (train, valid and
/// test). Triples are ranked in parallel; the report is ordered like `test`.
pub fn evaluate<S: TripleScorer + ?Sized>(
    scorer: &S,
    known: &KnowledgeGraph,
    constraints: Option<&TypeConstraints>,
    test: &[Triple],
    negatives: &[Triple],
    opts: &EvalOptions,
) -> Result<RankingReport> {
    if test.is_empty() {
        return Err(Error::Degenerate("nothing to evaluate".into()));
    }
    for t in test.iter().chain(negatives) {
        known.check_triple(t)?;
    }
    let ranks: Vec<TripleRanks> = test
        .par_iter()
        .map(|&t| TripleRanks {
            triple: t,
            object_rank: rank_entities(scorer, known, constraints, t, Slot::Object, opts.filtered),
            subject_rank: opts
                .both_sides
                .then(|| rank_entities(scorer, known, constraints, t, Slot::Subject, opts.filtered)),
        })
        .collect();
    let flat: Vec<f64> = ranks.iter().flat_map(|r| std::iter::once(r.object_rank).chain(r.subject_rank)).collect();
    let hits = |n: f64| flat.iter().filter(|&&r| r <= n).count() as f64 / flat.len() as f64;
    let (auc_roc_v, auc_pr_v) = if negatives.is_empty() {
        (None, None)
    } else {
        let scores: Vec<f64> = test.iter().chain(negatives).map(|&t| scorer.score_triple(t)).collect();
        let labels: Vec<bool> = (0..scores.len()).map(|i| i < test.len()).collect();
        (Some(auc_roc(&scores, &labels)?), Some(auc_pr(&scores, &labels)?))
    };
    Ok(RankingReport {
        filtered: opts.filtered,
        mrr: mrr(&flat)?,
        hits_at_1: hits(1.0),
        hits_at_10: hits(10.0),
        ranks,
        auc_roc: auc_roc_v,
        auc_pr: auc_pr_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::train::FnScorer;

    #[test]
    fn truth_strictly_highest_is_rank_one() {
        let kg = synth::random_graph(8, 1, 10, 2);
        let t = kg.triples()[0];
        let s = FnScorer(move |c: Triple| if c == t { 1.0 } else { 0.0 });
        assert_eq!(rank_entities(&s, &kg, None, t, Slot::Object, true), 1.0);
    }

    #[test]
    fn constant_scores_give_mid_rank() {
        let kg = synth::random_graph(9, 1, 0, 2);
        let s = FnScorer(|_: Triple| 0.25);
        assert_eq!(rank_entities(&s, &kg, None, Triple::new(0, 0, 3), Slot::Object, true), 5.0);
    }

    #[test]
    fn filtering_never_worsens_rank() {
        let kg = synth::random_graph(10, 2, 40, 5);
        let s = FnScorer(|t: Triple| ((t.subject.0 * 7 + t.object.0 * 3 + t.relation.0) % 5) as f64);
        for &t in kg.triples() {
            for slot in [Slot::Subject, Slot::Object] {
                assert!(rank_entities(&s, &kg, None, t, slot, true) <= rank_entities(&s, &kg, None, t, slot, false));
            }
        }
    }
}
