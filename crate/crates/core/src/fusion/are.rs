//! Additive relational effects: a RESCAL score plus a PRA linear term, fitted by
//! alternating between the two parts.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::graphfeat::logistic::{fit_logistic, LogisticOptions};
use crate::graphfeat::{enumerate_path_types, pra_feature_matrix, pra_features, PathType, PraConfig, PraModel};
use crate::latent::{Gradient, LatentModel, ModelConfig, ModelKind, RescalParams};
use crate::linalg::{dot, sigmoid, softplus, Matrix};
use crate::sampling::LabeledTripleSet;
use crate::seed;
use crate::train::TripleScorer;

/// `f = e_iᵀ W_k e_j + w_kᵀ φ^PRA(i, j) + b_k`, with path features read from `graph`.
#[derive(Clone, Debug, PartialEq)]
pub struct AreModel {
    pub rescal: RescalParams,
    pub pra: Vec<Option<PraModel>>,
    pub graph: KnowledgeGraph,
}

/// The parts of an ARE score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreComponents {
    pub latent: f64,
    pub pra_linear: f64,
    pub pra_bias: f64,
    /// No PRA model exists for the relation; its term is 0.
    pub missing_pra: bool,
}

impl AreComponents {
    pub fn total(&self) -> f64 {
        self.latent + self.pra_linear + self.pra_bias
    }
}

impl AreModel {
    pub fn components(&self, t: Triple) -> Result<AreComponents> {
        let (ne, nr) = (self.rescal.entity.rows(), self.rescal.relation.len());
        if t.subject.index() >= ne || t.object.index() >= ne || t.relation.index() >= nr {
            return Err(Error::DimensionMismatch(format!("triple {t} outside the model")));
        }
        Ok(self.components_unchecked(t))
    }

    fn components_unchecked(&self, t: Triple) -> AreComponents {
        let latent = rescal_score(&self.rescal, t);
        match self.pra.get(t.relation.index()) {
            Some(Some(m)) => AreComponents {
                latent,
                pra_linear: m.linear_term(&self.graph, t.subject, t.object),
                pra_bias: m.bias,
                missing_pra: false,
            },
            _ => AreComponents { latent, pra_linear: 0.0, pra_bias: 0.0, missing_pra: true },
        }
    }
}

fn rescal_score(r: &RescalParams, t: Triple) -> f64 {
    let ei = r.entity.row(t.subject.index());
    let ej = r.entity.row(t.object.index());
    dot(&r.relation[t.relation.index()].tr_mul_vec(ei), ej)
}

pub fn are_score(m: &AreModel, t: Triple) -> Result<f64> {
    Ok(m.components(t)?.total())
}

impl TripleScorer for AreModel {
    fn score_triple(&self, t: Triple) -> f64 {
        self.components_unchecked(t).total()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreConfig {
    /// Latent dimension; 0 disables the RESCAL part.
    pub dim: usize,
    /// Whether to use path features; without them each relation keeps only a bias.
    pub use_paths: bool,
    pub pra: PraConfig,
    pub learning_rate: f64,
    /// Ridge strength on the latent parameters.
    pub l2: f64,
    pub max_rounds: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for AreConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            use_paths: true,
            pra: PraConfig::default(),
            learning_rate: 0.1,
            l2: 1e-3,
            max_rounds: 50,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AreReport {
    /// Joint objective after initialisation and after every round.
    pub trace: Vec<f64>,
    /// Latent epochs rejected because they raised the joint objective.
    pub rejected_epochs: usize,
    /// Relations left without a PRA model (single-class training data).
    pub missing_relations: Vec<RelationId>,
    pub converged: bool,
}

struct RelationData {
    examples: Vec<usize>,
    features: Matrix,
    paths: Vec<PathType>,
    weights: Vec<f64>,
    bias: f64,
    active: bool,
}

/// Alternate one SGD epoch on the latent part (PRA term held fixed as an offset)
/// with a full refit of each relation's PRA weights (latent scores as offsets).
///
/// The joint objective is the mean log loss plus the PRA L1 terms and the latent
/// ridge. A latent epoch that would raise it is undone and the learning rate
/// halved, and each PRA refit starts from the current weights with a monotone
/// solver, so the recorded trace never increases. Stops after `max_rounds` or once
/// a round improves the objective by less than `tol`.
pub fn fit_are(graph: &KnowledgeGraph, data: &LabeledTripleSet, cfg: &AreConfig) -> Result<(AreModel, AreReport)> {
    if data.is_empty() {
        return Err(Error::Degenerate("no training examples".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.l2 >= 0.0) {
        return Err(Error::InvalidConfig("ARE needs learning_rate > 0 and l2 >= 0".into()));
    }
    let triples = data.triples();
    for t in &triples {
        graph.check_triple(t)?;
    }
    let y: Vec<f64> = data.items.iter().map(|it| it.label() as f64).collect();
    let n = triples.len() as f64;
    let (ne, nr) = (graph.num_entities(), graph.num_relations());

    let mut relations: Vec<RelationData> = (0..nr)
        .map(|k| {
            let k = RelationId(k as u32);
            let examples: Vec<usize> = (0..triples.len()).filter(|&x| triples[x].relation == k).collect();
            let paths = if cfg.use_paths && !examples.is_empty() {
                enumerate_path_types(graph, k, cfg.pra.max_len, cfg.pra.budget, seed::derive_seed(cfg.seed, "are-paths"))?
            } else {
                Vec::new()
            };
            let pairs: Vec<(EntityId, EntityId)> = examples.iter().map(|&x| (triples[x].subject, triples[x].object)).collect();
            let features = pra_feature_matrix(graph, &pairs, &paths);
            let pos = examples.iter().filter(|&&x| y[x] > 0.5).count();
            let active = pos > 0 && pos < examples.len();
            Ok(RelationData { weights: vec![0.0; paths.len()], examples, features, paths, bias: 0.0, active })
        })
        .collect::<Result<_>>()?;

    let mut latent = if cfg.dim == 0 {
        LatentModel::Rescal(RescalParams::zeros(ne, nr, 0))
    } else {
        LatentModel::init(&ModelConfig::new(ModelKind::Rescal, cfg.dim), ne, nr, seed::derive_seed(cfg.seed, "are-latent"))?
    };

    let latent_scores = |m: &LatentModel| -> Vec<f64> { triples.iter().map(|&t| m.score_unchecked(t)).collect() };
    let pra_terms = |rels: &[RelationData]| -> Vec<f64> {
        let mut out = vec![0.0; triples.len()];
        for r in rels.iter().filter(|r| r.active) {
            let lin = r.features.mul_vec(&r.weights);
            for (row, &x) in r.examples.iter().enumerate() {
                out[x] = lin[row] + r.bias;
            }
        }
        out
    };
    let objective = |m: &LatentModel, rels: &[RelationData], ls: &[f64], ps: &[f64]| -> f64 {
        let data: f64 = ls.iter().zip(ps).zip(&y).map(|((l, p), &yy)| {
            let z = l + p;
            softplus(z) - yy * z
        }).sum::<f64>() / n;
        let l1: f64 = rels
            .iter()
            .filter(|r| r.active)
            .map(|r| r.examples.len() as f64 / n * cfg.pra.l1 * r.weights.iter().map(|w| w.abs()).sum::<f64>())
            .sum();
        let ridge: f64 = m.blocks().iter().map(|(_, b)| b.frobenius_sq()).sum::<f64>() * cfg.l2 / (2.0 * n);
        data + l1 + ridge
    };
    let refit_pra = |rels: &mut [RelationData], ls: &[f64]| -> Result<()> {
        for r in rels.iter_mut().filter(|r| r.active) {
            let offset: Vec<f64> = r.examples.iter().map(|&x| ls[x]).collect();
            let yk: Vec<f64> = r.examples.iter().map(|&x| y[x]).collect();
            let opts = LogisticOptions { l1: cfg.pra.l1, l2: 0.0, tol: cfg.pra.tol, max_iter: cfg.pra.max_iter };
            let fit = fit_logistic(&r.features, &yk, Some(&offset), Some((&r.weights, r.bias)), opts)?;
            r.weights = fit.weights;
            r.bias = fit.bias;
        }
        Ok(())
    };

    let mut report = AreReport {
        missing_relations: relations
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.active)
            .map(|(k, _)| RelationId(k as u32))
            .collect(),
        ..AreReport::default()
    };
    let mut ls = latent_scores(&latent);
    refit_pra(&mut relations, &ls)?;
    let mut ps = pra_terms(&relations);
    let mut obj = objective(&latent, &relations, &ls, &ps);
    report.trace.push(obj);

    let mut rng = seed::derive_rng(cfg.seed, "are-sgd");
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut rate = cfg.learning_rate;
    let mut rising = 0;
    for _ in 0..cfg.max_rounds {
        let start = obj;
        if cfg.dim > 0 {
            let backup = latent.clone();
            order.shuffle(&mut rng);
            for &x in &order {
                let t = triples[x];
                let g = sigmoid(latent.score_unchecked(t) + ps[x]) - y[x];
                let mut grad = Gradient::new();
                latent.accumulate_score_gradient(t, g, &mut grad);
                latent.apply_step(&grad, rate, cfg.l2);
            }
            let new_ls = latent_scores(&latent);
            let new_obj = objective(&latent, &relations, &new_ls, &ps);
            if new_obj.is_finite() && new_obj <= obj {
                ls = new_ls;
            } else {
                latent = backup;
                rate *= 0.5;
                report.rejected_epochs += 1;
            }
        }
        refit_pra(&mut relations, &ls)?;
        ps = pra_terms(&relations);
        let refit_obj = objective(&latent, &relations, &ls, &ps);
        if !refit_obj.is_finite() {
            return Err(Error::Numerical(format!("ARE objective diverged; trace {:?}", report.trace)));
        }
        obj = refit_obj;
        report.trace.push(obj);
        if obj > start + cfg.tol {
            rising += 1;
            if rising >= 3 {
                return Err(Error::Numerical(format!("ARE objective rose for 3 rounds; trace {:?}", report.trace)));
            }
        } else {
            rising = 0;
        }
        if (start - obj).abs() < cfg.tol {
            report.converged = true;
            break;
        }
    }

    let LatentModel::Rescal(rescal) = latent else { unreachable!("constructed as RESCAL") };
    let pra = relations
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.active.then(|| {
                PraModel { relation: RelationId(k as u32), path_types: r.paths, weights: r.weights, bias: r.bias }.pruned()
            })
        })
        .collect();
    Ok((AreModel { rescal, pra, graph: graph.clone() }, report))
}

/// PRA term alone for `t`, recomputing its features; used to check decompositions.
pub fn pra_component(m: &AreModel, t: Triple) -> f64 {
    match m.pra.get(t.relation.index()) {
        Some(Some(p)) => dot(&p.weights, &pra_features(&m.graph, t.subject, t.object, &p.path_types)) + p.bias,
        _ => 0.0,
    }
}
