//! Losses, SGD training, entity ranking, metrics and model selection.

mod loss;
mod metrics;
mod rank;
mod report;
mod select;
mod sgd;

pub use loss::{log_loss, pairwise, pointwise, ranking_loss, squared_loss, LossEval, LossKind};
pub use metrics::{auc_pr, auc_roc, mrr};
pub use rank::{evaluate, rank_entities, EvalOptions, RankingReport, TripleRanks};
pub use report::{write_metrics_json, write_metrics_tsv, write_trace_csv};
pub use select::{cross_validate, fold_assignment, CvReport, CvRow};
pub use sgd::{example_gradient, sgd_train, TrainConfig, TrainReport};

use crate::graph::Triple;
use crate::latent::LatentModel;

/// Anything that assigns a real-valued plausibility to a triple.
pub trait TripleScorer: Sync {
    fn score_triple(&self, t: Triple) -> f64;
}

impl TripleScorer for LatentModel {
    fn score_triple(&self, t: Triple) -> f64 {
        self.score_unchecked(t)
    }
}

impl<S: TripleScorer + ?Sized> TripleScorer for &S {
    fn score_triple(&self, t: Triple) -> f64 {
        (**self).score_triple(t)
    }
}

impl<S: TripleScorer + ?Sized> TripleScorer for Box<S> {
    fn score_triple(&self, t: Triple) -> f64 {
        (**self).score_triple(t)
    }
}

/// Adapts a closure to [`TripleScorer`].
pub struct FnScorer<F>(pub F);

impl<F: Fn(Triple) -> f64 + Sync> TripleScorer for FnScorer<F> {
    fn score_triple(&self, t: Triple) -> f64 {
        (self.0)(t)
    }
}
