//! Fixtures shared by the criterion benchmarks in `benches/`.

use kgraph_core::{synth, KnowledgeGraph, LatentModel, ModelConfig, ModelKind, Triple};

/// Random graph with `degree` triples per entity and relation on average.
pub fn sparse_graph(n_entities: usize, n_relations: usize, degree: usize, seed: u64) -> KnowledgeGraph {
    synth::random_graph(n_entities, n_relations, n_entities * n_relations * degree, seed)
}

/// Seeded model of `kind` sized for `kg`.
pub fn model_for(kg: &KnowledgeGraph, kind: ModelKind, dim: usize) -> LatentModel {
    let cfg = ModelConfig { hidden_b: dim.min(4), ..ModelConfig::new(kind, dim) };
    LatentModel::init(&cfg, kg.num_entities(), kg.num_relations(), 7).expect("valid config")
}

/// First `n` triples of `kg`.
pub fn sample_triples(kg: &KnowledgeGraph, n: usize) -> Vec<Triple> {
    kg.triples().iter().take(n).copied().collect()
}
