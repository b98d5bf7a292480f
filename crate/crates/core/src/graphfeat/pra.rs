//! Path ranking: random-walk probabilities along typed relation paths as features
//! of a sparse logistic model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Direction, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::linalg::{dot, sigmoid, Matrix};
use crate::seed;

use super::logistic::{check_both_classes, fit_logistic, LogisticFit, LogisticOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathStep {
    pub relation: RelationId,
    pub direction: Direction,
}

impl PathStep {
    pub fn forward(k: u32) -> Self {
        Self { relation: RelationId(k), direction: Direction::Forward }
    }

    pub fn inverse(k: u32) -> Self {
        Self { relation: RelationId(k), direction: Direction::Inverse }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathType {
    pub steps: Vec<PathStep>,
}

impl PathType {
    pub fn new(steps: Vec<PathStep>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// True for the one-step path that is the target relation itself.
    pub fn is_direct(&self, k: RelationId) -> bool {
        self.steps == [PathStep { relation: k, direction: Direction::Forward }]
    }

    fn extended(&self, step: PathStep) -> Self {
        let mut steps = self.steps.clone();
        steps.push(step);
        Self { steps }
    }
}

fn step_targets(kg: &KnowledgeGraph, from: EntityId, step: PathStep) -> &[EntityId] {
    kg.out_neighbors(from, step.relation, step.direction)
}

/// Distribution of a uniform random walk from `i` along `t`.
///
/// At each step the walker picks uniformly among the out-neighbours for that
/// relation and direction; a walker with none is lost. Entries are sorted by id.
pub fn walk_distribution(kg: &KnowledgeGraph, i: EntityId, t: &PathType) -> BTreeMap<EntityId, f64> {
    let mut dist = BTreeMap::from([(i, 1.0)]);
    for &step in &t.steps {
        let mut next = BTreeMap::new();
        for (&z, &p) in &dist {
            let targets = step_targets(kg, z, step);
            if targets.is_empty() {
                continue;
            }
            let share = p / targets.len() as f64;
            for &v in targets {
                *next.entry(v).or_insert(0.0) += share;
            }
        }
        dist = next;
        if dist.is_empty() {
            break;
        }
    }
    dist
}

/// Probability that a uniform random walk from `i` along `t` ends at `j`.
pub fn path_probability(kg: &KnowledgeGraph, i: EntityId, j: EntityId, t: &PathType) -> f64 {
    walk_distribution(kg, i, t).get(&j).copied().unwrap_or(0.0)
}

/// `φ^PRA(i, j)`: one path probability per path type.
pub fn pra_features(kg: &KnowledgeGraph, i: EntityId, j: EntityId, paths: &[PathType]) -> Vec<f64> {
    paths.iter().map(|t| path_probability(kg, i, j, t)).collect()
}

/// Feature rows for many pairs. Walks are shared between pairs with the same
/// subject and computed in parallel across subjects.
pub fn pra_feature_matrix(kg: &KnowledgeGraph, pairs: &[(EntityId, EntityId)], paths: &[PathType]) -> Matrix {
    let subjects: Vec<EntityId> = pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>().into_iter().collect();
    let walks: BTreeMap<EntityId, Vec<BTreeMap<EntityId, f64>>> = subjects
        .par_iter()
        .map(|&i| (i, paths.iter().map(|t| walk_distribution(kg, i, t)).collect()))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Matrix::from_fn(pairs.len(), paths.len(), |r, c| {
        let (i, j) = pairs[r];
        walks[&i][c].get(&j).copied().unwrap_or(0.0)
    })
}

/// Path types of length `1..=max_len` that lead from the subject to the object of
/// at least one `k` triple in `kg`, excluding the direct `k` step.
///
/// When more than `budget` types qualify, a seeded uniform subsample of `budget`
/// is kept. The result is sorted.
pub fn enumerate_path_types(kg: &KnowledgeGraph, k: RelationId, max_len: usize, budget: usize, seed: u64) -> Result<Vec<PathType>> {
    if max_len == 0 {
        return Err(Error::InvalidConfig("path length must be >= 1".into()));
    }
    let slice = kg.relation_slice(k)?;
    let steps: Vec<PathStep> = (0..kg.num_relations() as u32)
        .flat_map(|r| [PathStep::forward(r), PathStep::inverse(r)])
        .collect();
    let mut found = BTreeSet::new();
    let mut sources: Vec<EntityId> = slice.iter().map(|(i, _)| i).collect();
    sources.dedup();
    for i in sources {
        let targets = slice.row(i);
        let mut frontier: BTreeMap<PathType, BTreeSet<EntityId>> = BTreeMap::from([(PathType::new(Vec::new()), BTreeSet::from([i]))]);
        for _ in 0..max_len {
            let mut next: BTreeMap<PathType, BTreeSet<EntityId>> = BTreeMap::new();
            for (t, reached) in &frontier {
                for &step in &steps {
                    let ends: BTreeSet<EntityId> = reached.iter().flat_map(|&z| step_targets(kg, z, step).iter().copied()).collect();
                    if ends.is_empty() {
                        continue;
                    }
                    let ext = t.extended(step);
                    if !ext.is_direct(k) && targets.iter().any(|j| ends.contains(j)) {
                        found.insert(ext.clone());
                    }
                    next.insert(ext, ends);
                }
            }
            frontier = next;
        }
    }
    let found: Vec<PathType> = found.into_iter().collect();
    if found.len() <= budget {
        return Ok(found);
    }
    let mut rng = seed::derive_rng(seed, &format!("pra-paths-{}", k.0));
    let mut keep = index::sample(&mut rng, found.len(), budget).into_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|ix| found[ix].clone()).collect())
}

/// Logistic model over path features for one target relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PraModel {
    pub relation: RelationId,
    pub path_types: Vec<PathType>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl PraModel {
    /// `wᵀ φ^PRA(i, j)` computed over `kg`.
    pub fn linear_term(&self, kg: &KnowledgeGraph, i: EntityId, j: EntityId) -> f64 {
        dot(&self.weights, &pra_features(kg, i, j, &self.path_types))
    }

    /// `wᵀ φ + b`, the logit of the predicted probability.
    pub fn score(&self, kg: &KnowledgeGraph, i: EntityId, j: EntityId) -> f64 {
        self.linear_term(kg, i, j) + self.bias
    }

    pub fn probability(&self, kg: &KnowledgeGraph, i: EntityId, j: EntityId) -> f64 {
        sigmoid(self.score(kg, i, j))
    }

    /// Drop path types whose weight is exactly zero.
    pub fn pruned(mut self) -> Self {
        let keep: Vec<bool> = self.weights.iter().map(|&w| w != 0.0).collect();
        let mut flags = keep.iter();
        self.path_types.retain(|_| *flags.next().expect("aligned"));
        self.weights.retain(|&w| w != 0.0);
        self
    }

    pub fn to_file(&self, kg: &KnowledgeGraph) -> PraModelFile {
        PraModelFile {
            relation: kg.relation_name(self.relation).to_string(),
            bias: self.bias,
            paths: self
                .path_types
                .iter()
                .zip(&self.weights)
                .map(|(t, &weight)| NamedPath {
                    steps: t.steps.iter().map(|s| NamedStep { relation: kg.relation_name(s.relation).to_string(), direction: s.direction }).collect(),
                    weight,
                })
                .collect(),
        }
    }

    pub fn from_file(f: &PraModelFile, kg: &KnowledgeGraph) -> Result<Self> {
        let mut path_types = Vec::new();
        let mut weights = Vec::new();
        for p in &f.paths {
            let steps = p
                .steps
                .iter()
                .map(|s| Ok(PathStep { relation: kg.relation(&s.relation)?, direction: s.direction }))
                .collect::<Result<Vec<_>>>()?;
            if !p.weight.is_finite() {
                return Err(Error::Format("non-finite PRA weight".into()));
            }
            path_types.push(PathType::new(steps));
            weights.push(p.weight);
        }
        Ok(Self { relation: kg.relation(&f.relation)?, path_types, weights, bias: f.bias })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedStep {
    pub relation: String,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedPath {
    pub steps: Vec<NamedStep>,
    pub weight: f64,
}

/// Serialized form of a [`PraModel`] with relations referenced by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PraModelFile {
    pub relation: String,
    pub bias: f64,
    pub paths: Vec<NamedPath>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PraConfig {
    pub max_len: usize,
    pub budget: usize,
    pub l1: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PraConfig {
    fn default() -> Self {
        Self { max_len: 2, budget: 200, l1: 1e-3, tol: 1e-8, max_iter: 20_000 }
    }
}

impl PraConfig {
    pub fn logistic(&self) -> LogisticOptions {
        LogisticOptions { l1: self.l1, l2: 0.0, tol: self.tol, max_iter: self.max_iter }
    }
}

/// L1-penalised logistic regression of `k` on path features computed over `kg`.
///
/// `positives` and `negatives` must be `k` triples. Zero-weight paths are pruned
/// from the returned model; the fit's objective trace is returned alongside.
pub fn fit_pra(
    kg: &KnowledgeGraph,
    k: RelationId,
    paths: &[PathType],
    positives: &[Triple],
    negatives: &[Triple],
    cfg: &PraConfig,
) -> Result<(PraModel, LogisticFit)> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Degenerate(format!("PRA for relation {} needs both positive and negative examples", k.0)));
    }
    if let Some(t) = positives.iter().chain(negatives).find(|t| t.relation != k) {
        return Err(Error::InvalidConfig(format!("triple {t} is not of relation {}", k.0)));
    }
    let pairs: Vec<(EntityId, EntityId)> = positives.iter().chain(negatives).map(|t| (t.subject, t.object)).collect();
    let y: Vec<f64> = positives.iter().map(|_| 1.0).chain(negatives.iter().map(|_| 0.0)).collect();
    check_both_classes(&y)?;
    let x = pra_feature_matrix(kg, &pairs, paths);
    let fit = fit_logistic(&x, &y, None, None, cfg.logistic())?;
    let model = PraModel { relation: k, path_types: paths.to_vec(), weights: fit.weights.clone(), bias: fit.bias }.pruned();
    Ok((model, fit))
}

fn atom(out: &mut String, a: &str, r: &str, b: &str) {
    let _ = write!(out, "({a}, {r}, {b})");
}

/// Horn-clause rendering of one path: `(x, k, y) ← (x, r1, z1) ∧ (z1, r2, y)`.
/// Inverse steps swap their arguments.
pub fn format_rule(kg: &KnowledgeGraph, k: RelationId, t: &PathType) -> String {
    let mut s = String::new();
    atom(&mut s, "x", kg.relation_name(k), "y");
    s.push_str(" ←");
    let var = |l: usize| match l {
        0 => "x".to_string(),
        l if l == t.len() => "y".to_string(),
        l => format!("z{l}"),
    };
    for (l, step) in t.steps.iter().enumerate() {
        if l > 0 {
            s.push_str(" ∧");
        }
        s.push(' ');
        let (a, b) = (var(l), var(l + 1));
        let r = kg.relation_name(step.relation);
        match step.direction {
            Direction::Forward => atom(&mut s, &a, r, &b),
            Direction::Inverse => atom(&mut s, &b, r, &a),
        }
    }
    s
}

/// Nonzero-weight paths of `m` as `(weight, rule)`, by descending weight.
pub fn pra_rules(m: &PraModel, kg: &KnowledgeGraph) -> Vec<(f64, String)> {
    let mut rules: Vec<(f64, String)> = m
        .path_types
        .iter()
        .zip(&m.weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(t, &w)| (w, format_rule(kg, m.relation, t)))
        .collect();
    rules.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    rules
}
