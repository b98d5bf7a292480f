//! Additive model with per-(relation, entity) weights on subject and object
//! representations plus a neighbourhood term over the other relations between
//! the same pair.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, RelationId, Triple};
use crate::linalg::{axpy, dot, sigmoid, softplus, Matrix};
use crate::sampling::LabeledTripleSet;
use crate::seed;

/// `f_ijk = w1_{k,j}ᵀ φ^SUB_i + w2_{k,i}ᵀ φ^OBJ_j + w3_kᵀ φ^N_ijk`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveModel {
    /// `φ^SUB`, `N_e × H`.
    pub subject_repr: Matrix,
    /// `φ^OBJ`, `N_e × H`.
    pub object_repr: Matrix,
    /// Per relation, row `j` is `w1_{k,j}`.
    pub subject_weights: Vec<Matrix>,
    /// Per relation, row `i` is `w2_{k,i}`.
    pub object_weights: Vec<Matrix>,
    /// `N_r × (N_r − 1)`, row `k` is `w3_k`.
    pub neighbor_weights: Matrix,
}

/// `φ^N_ijk = [y_ijk' : k' ≠ k]` in relation order.
pub fn neighbor_features(kg: &KnowledgeGraph, t: Triple) -> Vec<f64> {
    (0..kg.num_relations() as u32)
        .filter(|&r| r != t.relation.0)
        .map(|r| kg.contains(&Triple { relation: RelationId(r), ..t }) as u8 as f64)
        .collect()
}

impl AdditiveModel {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        Self {
            subject_repr: Matrix::zeros(num_entities, dim),
            object_repr: Matrix::zeros(num_entities, dim),
            subject_weights: vec![Matrix::zeros(num_entities, dim); num_relations],
            object_weights: vec![Matrix::zeros(num_entities, dim); num_relations],
            neighbor_weights: Matrix::zeros(num_relations, num_relations.saturating_sub(1)),
        }
    }

    pub fn num_relations(&self) -> usize {
        self.subject_weights.len()
    }

    /// Score of `t` with the neighbourhood term read from `kg`.
    pub fn score(&self, t: Triple, kg: &KnowledgeGraph) -> Result<f64> {
        let ne = self.subject_repr.rows();
        if t.subject.index() >= ne || t.object.index() >= ne || t.relation.index() >= self.num_relations() {
            return Err(Error::DimensionMismatch(format!("triple {t} outside the model")));
        }
        if kg.num_relations() != self.num_relations() {
            return Err(Error::DimensionMismatch("graph and model disagree on relations".into()));
        }
        Ok(self.score_with(t, &neighbor_features(kg, t)))
    }

    fn score_with(&self, t: Triple, phi_n: &[f64]) -> f64 {
        let (i, k, j) = (t.subject.index(), t.relation.index(), t.object.index());
        dot(self.subject_weights[k].row(j), self.subject_repr.row(i))
            + dot(self.object_weights[k].row(i), self.object_repr.row(j))
            + dot(self.neighbor_weights.row(k), phi_n)
    }
}

pub fn additive_score(m: &AdditiveModel, t: Triple, kg: &KnowledgeGraph) -> Result<f64> {
    m.score(t, kg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Ridge strength, applied in proximal form to every touched row.
    pub l2: f64,
    pub seed: u64,
}

impl Default for AdditiveConfig {
    fn default() -> Self {
        Self { dim: 4, learning_rate: 0.1, epochs: 50, l2: 1e-3, seed: 0 }
    }
}

fn step_row(row: &mut [f64], grad: &[f64], rate: f64, shrink: f64) {
    axpy(-rate, grad, row);
    row.iter_mut().for_each(|v| *v *= shrink);
}

/// SGD on the mean log loss of `data`, neighbourhood features read from `kg`.
/// Returns the mean loss of each epoch.
pub fn fit_additive(kg: &KnowledgeGraph, data: &LabeledTripleSet, cfg: &AdditiveConfig) -> Result<(AdditiveModel, Vec<f64>)> {
    if cfg.dim == 0 || cfg.epochs == 0 || !(cfg.learning_rate > 0.0) || !(cfg.l2 >= 0.0) {
        return Err(Error::InvalidConfig("additive model needs dim, epochs, learning_rate > 0 and l2 >= 0".into()));
    }
    let (ne, nr) = (kg.num_entities(), kg.num_relations());
    let mut m = AdditiveModel::zeros(ne, nr, cfg.dim);
    let normal = Normal::new(0.0, 1.0 / (cfg.dim as f64).sqrt()).expect("positive std");
    let mut rng = seed::derive_rng(cfg.seed, "additive-init");
    for b in [&mut m.subject_repr, &mut m.object_repr].into_iter().chain(m.subject_weights.iter_mut()).chain(m.object_weights.iter_mut()) {
        b.as_mut_slice().iter_mut().for_each(|v| *v = 0.1 * normal.sample(&mut rng));
    }
    let examples: Vec<(Triple, f64, Vec<f64>)> = data
        .items
        .iter()
        .map(|it| {
            kg.check_triple(&it.triple)?;
            Ok((it.triple, it.label() as f64, neighbor_features(kg, it.triple)))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = seed::derive_rng(cfg.seed, "additive-sgd");
    let shrink = 1.0 / (1.0 + cfg.learning_rate * cfg.l2);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &x in &order {
            let (t, y, ref phi_n) = examples[x];
            let (i, k, j) = (t.subject.index(), t.relation.index(), t.object.index());
            let f = m.score_with(t, phi_n);
            total += softplus(f) - y * f;
            let g = sigmoid(f) - y;
            let lr = cfg.learning_rate;
            let sub = m.subject_repr.row(i).to_vec();
            let w1 = m.subject_weights[k].row(j).to_vec();
            let obj = m.object_repr.row(j).to_vec();
            let w2 = m.object_weights[k].row(i).to_vec();
            let scaled = |v: &[f64]| v.iter().map(|x| g * x).collect::<Vec<_>>();
            step_row(m.subject_weights[k].row_mut(j), &scaled(&sub), lr, shrink);
            step_row(m.subject_repr.row_mut(i), &scaled(&w1), lr, shrink);
            step_row(m.object_weights[k].row_mut(i), &scaled(&obj), lr, shrink);
            step_row(m.object_repr.row_mut(j), &scaled(&w2), lr, shrink);
            step_row(m.neighbor_weights.row_mut(k), &scaled(phi_n), lr, shrink);
        }
        let mean = total / examples.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical("additive model loss is not finite".into()));
        }
        trace.push(mean);
    }
    Ok((m, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ingest_triples;

    fn born_lived() -> KnowledgeGraph {
        ingest_triples([
            ("LeonardNimoy", "bornIn", "Boston"),
            ("AlecGuinness", "bornIn", "London"),
            ("AlecGuinness", "livedIn", "London"),
        ])
        .unwrap()
    }

    #[test]
    fn born_in_raises_lived_in() {
        let kg = born_lived();
        let mut m = AdditiveModel::zeros(kg.num_entities(), kg.num_relations(), 2);
        let lived = kg.relation("livedIn").unwrap();
        // Row of livedIn; its only neighbour feature is bornIn.
        m.neighbor_weights.set(lived.index(), 0, 1.5);
        let nimoy = kg.entity("LeonardNimoy").unwrap();
        let t = Triple { subject: nimoy, relation: lived, object: kg.entity("Boston").unwrap() };
        let other = Triple { object: kg.entity("London").unwrap(), ..t };
        assert_eq!(m.score(t, &kg).unwrap(), 1.5);
        assert_eq!(m.score(other, &kg).unwrap(), 0.0);
    }

    #[test]
    fn zero_model_scores_zero_and_features_have_fixed_length() {
        let kg = born_lived();
        let m = AdditiveModel::zeros(kg.num_entities(), kg.num_relations(), 3);
        for &t in kg.triples() {
            assert_eq!(m.score(t, &kg).unwrap(), 0.0);
            assert_eq!(neighbor_features(&kg, t).len(), kg.num_relations() - 1);
        }
    }

    #[test]
    fn fitting_reduces_loss() {
        let kg = crate::synth::random_graph(10, 3, 40, 6);
        let tc = crate::graph::infer_type_constraints(&kg);
        let data = crate::sampling::perturbation_set(&kg, kg.triples(), 1, &tc, 1);
        let (_, trace) = fit_additive(&kg, &data, &AdditiveConfig { epochs: 30, ..AdditiveConfig::default() }).unwrap();
        assert!(trace.last().unwrap() < &trace[0]);
    }
}
