//! Observable graph features: similarity indices and path ranking.

pub mod logistic;
mod pra;
mod similarity;

pub use pra::{
    enumerate_path_types, fit_pra, format_rule, path_probability, pra_feature_matrix, pra_features, pra_rules,
    walk_distribution, NamedPath, NamedStep, PathStep, PathType, PraConfig, PraModel, PraModelFile,
};
pub use similarity::{similarity, Similarity, SimilarityGraph, SimilarityKind};

use crate::graph::{KnowledgeGraph, Triple};
use crate::train::TripleScorer;

/// One PRA model per relation over a fixed feature graph. Relations without a
/// model score 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PraScorer {
    pub graph: KnowledgeGraph,
    pub models: Vec<Option<PraModel>>,
}

impl PraScorer {
    pub fn new(graph: KnowledgeGraph, models: Vec<Option<PraModel>>) -> Self {
        Self { graph, models }
    }

    /// True when relation `k` has no model and scores fall back to 0.
    pub fn is_missing(&self, t: &Triple) -> bool {
        self.models.get(t.relation.index()).is_none_or(Option::is_none)
    }
}

impl TripleScorer for PraScorer {
    fn score_triple(&self, t: Triple) -> f64 {
        match self.models.get(t.relation.index()) {
            Some(Some(m)) => m.score(&self.graph, t.subject, t.object),
            _ => 0.0,
        }
    }
}
