//! Latent feature models.
//!
//! Every model keeps one embedding row per entity, shared across relations and
//! across the subject and object slots. Parameters are exposed as an ordered list of
//! row-major blocks so that gradients, serialization and parameter counting can be
//! written once for all kinds.

mod als;
mod distance;
mod mlp;
mod ntn;
mod rescal;
mod store;

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{RelationId, Triple};
use crate::linalg::Matrix;
use crate::seed;

pub use als::{fit_rescal_als, AlsConfig, AlsReport, AlsStep};
pub use distance::{transe_rewritten_score, SeParams, TranseParams};
pub use mlp::{EmlpParams, ErmlpParams};
pub use ntn::{ntn_from_rescal, NtnParams};
pub use rescal::RescalParams;
pub use store::{read_model, write_model, ModelHeader};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Rescal,
    Emlp,
    Ermlp,
    Ntn,
    Se,
    Transe,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [Self::Rescal, Self::Emlp, Self::Ermlp, Self::Ntn, Self::Se, Self::Transe];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rescal => "rescal",
            Self::Emlp => "e-mlp",
            Self::Ermlp => "er-mlp",
            Self::Ntn => "ntn",
            Self::Se => "se",
            Self::Transe => "transe",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rescal" => Ok(Self::Rescal),
            "e-mlp" | "emlp" => Ok(Self::Emlp),
            "er-mlp" | "ermlp" => Ok(Self::Ermlp),
            "ntn" => Ok(Self::Ntn),
            "se" | "structured-embedding" => Ok(Self::Se),
            "transe" => Ok(Self::Transe),
            other => Err(Error::InvalidConfig(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Element-wise activation `g` of the MLP and NTN hidden layers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Tanh,
    Identity,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Self::Tanh => u.tanh(),
            Self::Identity => u,
        }
    }

    /// `g'(u)`
    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Self::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            Self::Identity => 1.0,
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Self::Tanh),
            "identity" | "linear" => Ok(Self::Identity),
            other => Err(Error::InvalidConfig(format!("unknown nonlinearity `{other}`"))),
        }
    }
}

/// Distance used by TransE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distance {
    #[default]
    SquaredEuclidean,
    L1,
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared-euclidean" | "l2sq" => Ok(Self::SquaredEuclidean),
            "l1" => Ok(Self::L1),
            other => Err(Error::InvalidConfig(format!("unknown distance `{other}`"))),
        }
    }
}

/// Model kind and layer sizes. Sizes a kind does not use are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// `H_e`
    pub entity_dim: usize,
    /// `H_r` (ER-MLP)
    pub relation_dim: usize,
    /// `H_a` (E-MLP, NTN, SE)
    pub hidden_a: usize,
    /// `H_b` (NTN)
    pub hidden_b: usize,
    /// `H_c` (ER-MLP)
    pub hidden_c: usize,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub distance: Distance,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, entity_dim: usize) -> Self {
        Self {
            kind,
            entity_dim,
            relation_dim: entity_dim,
            hidden_a: entity_dim,
            hidden_b: entity_dim,
            hidden_c: entity_dim,
            nonlinearity: Nonlinearity::Tanh,
            distance: Distance::SquaredEuclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidConfig(format!("{} requires {name} > 0", self.kind)))
            } else {
                Ok(())
            }
        };
        need("entity_dim", self.entity_dim)?;
        match self.kind {
            ModelKind::Rescal | ModelKind::Transe => Ok(()),
            ModelKind::Emlp | ModelKind::Se => need("hidden_a", self.hidden_a),
            ModelKind::Ermlp => {
                need("relation_dim", self.relation_dim)?;
                need("hidden_c", self.hidden_c)
            }
            ModelKind::Ntn => need("hidden_a + hidden_b", self.hidden_a + self.hidden_b),
        }
    }

    /// Number of scalar parameters for `num_entities` entities and `num_relations` relations.
    pub fn param_count(&self, num_entities: usize, num_relations: usize) -> usize {
        let (ne, nr) = (num_entities, num_relations);
        let he = self.entity_dim;
        let (ha, hb, hc, hr) = (self.hidden_a, self.hidden_b, self.hidden_c, self.relation_dim);
        let entities = ne * he;
        entities
            + match self.kind {
                ModelKind::Rescal => nr * he * he,
                ModelKind::Emlp => nr * (ha + ha * 2 * he),
                ModelKind::Ermlp => hc + hc * (2 * he + hr) + nr * hr,
                ModelKind::Ntn => nr * he * he * hb + nr * (hb + ha) + 2 * nr * he * ha,
                ModelKind::Se => 2 * nr * he * ha,
                ModelKind::Transe => nr * he,
            }
    }
}

/// Gradient with respect to one row of one parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct RowGradient {
    pub block: usize,
    pub row: usize,
    pub values: Vec<f64>,
}

/// Sparse, row-granular gradient over a model's parameter blocks.
#[derive(Clone, Debug, Default)]
pub struct Gradient {
    pub rows: Vec<RowGradient>,
    index: HashMap<(usize, usize), usize>,
}

impl PartialEq for Gradient {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

impl Gradient {
    pub fn new() -> Self {
        Self::default()
    }

    /// `grad[block][row] += scale * values`
    pub fn add_row(&mut self, block: usize, row: usize, scale: f64, values: &[f64]) {
        if values.is_empty() {
            return;
        }
        match self.index.entry((block, row)) {
            Entry::Occupied(e) => crate::linalg::axpy(scale, values, &mut self.rows[*e.get()].values),
            Entry::Vacant(e) => {
                e.insert(self.rows.len());
                self.rows.push(RowGradient { block, row, values: values.iter().map(|v| scale * v).collect() });
            }
        }
    }

    /// `grad[block] += scale * outer(left, right)`
    pub fn add_outer(&mut self, block: usize, scale: f64, left: &[f64], right: &[f64]) {
        for (r, &l) in left.iter().enumerate() {
            self.add_row(block, r, scale * l, right);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for r in &mut self.rows {
            r.values.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn merge(&mut self, other: Gradient) {
        for r in other.rows {
            self.add_row(r.block, r.row, 1.0, &r.values);
        }
    }

    /// Touched `(block, row)` pairs.
    pub fn touched(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().map(|r| (r.block, r.row))
    }

    /// Dense gradient shaped like `model`'s blocks.
    pub fn to_dense(&self, model: &LatentModel) -> Vec<Matrix> {
        let mut dense: Vec<Matrix> = model.blocks().iter().map(|(_, m)| Matrix::zeros(m.rows(), m.cols())).collect();
        for r in &self.rows {
            crate::linalg::axpy(1.0, &r.values, dense[r.block].row_mut(r.row));
        }
        dense
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LatentModel {
    Rescal(RescalParams),
    Emlp(EmlpParams),
    Ermlp(ErmlpParams),
    Ntn(NtnParams),
    Se(SeParams),
    Transe(TranseParams),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            LatentModel::Rescal($m) => $body,
            LatentModel::Emlp($m) => $body,
            LatentModel::Ermlp($m) => $body,
            LatentModel::Ntn($m) => $body,
            LatentModel::Se($m) => $body,
            LatentModel::Transe($m) => $body,
        }
    };
}

/// Shared behaviour of the concrete parameter sets.
pub(crate) trait Params {
    fn entity(&self) -> &Matrix;
    fn num_relations(&self) -> usize;
    fn score_of(&self, t: Triple) -> f64;
    /// Accumulate `upstream · ∂f(t)/∂θ` into `grad`.
    fn accumulate(&self, t: Triple, upstream: f64, grad: &mut Gradient);
    fn named_blocks(&self) -> Vec<(String, &Matrix)>;
    fn blocks_mut(&mut self) -> Vec<&mut Matrix>;
}

impl LatentModel {
    /// All-zero parameters with the shapes `cfg` prescribes.
    pub fn zeros(cfg: &ModelConfig, num_entities: usize, num_relations: usize) -> Self {
        let (ne, nr, he) = (num_entities, num_relations, cfg.entity_dim);
        match cfg.kind {
            ModelKind::Rescal => Self::Rescal(RescalParams::zeros(ne, nr, he)),
            ModelKind::Emlp => Self::Emlp(EmlpParams::zeros(ne, nr, he, cfg.hidden_a, cfg.nonlinearity)),
            ModelKind::Ermlp => Self::Ermlp(ErmlpParams::zeros(ne, nr, he, cfg.relation_dim, cfg.hidden_c, cfg.nonlinearity)),
            ModelKind::Ntn => Self::Ntn(NtnParams::zeros(ne, nr, he, cfg.hidden_a, cfg.hidden_b, cfg.nonlinearity)),
            ModelKind::Se => Self::Se(SeParams::zeros(ne, nr, he, cfg.hidden_a)),
            ModelKind::Transe => Self::Transe(TranseParams::zeros(ne, nr, he, cfg.distance)),
        }
    }

    /// Gaussian initialisation with standard deviation `1/√H_e`; TransE entity rows
    /// are then scaled to unit norm.
    pub fn init(cfg: &ModelConfig, num_entities: usize, num_relations: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut model = Self::zeros(cfg, num_entities, num_relations);
        let normal = Normal::new(0.0, 1.0 / (cfg.entity_dim as f64).sqrt()).expect("positive std");
        let mut rng = seed::derive_rng(seed, "latent-init");
        for block in model.blocks_mut() {
            block.as_mut_slice().iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        }
        if let Self::Transe(m) = &mut model {
            m.normalize_entities();
        }
        Ok(model)
    }

    /// Rebuild a model from `cfg` and blocks in [`LatentModel::blocks`] order.
    pub fn from_blocks(cfg: &ModelConfig, num_entities: usize, num_relations: usize, blocks: Vec<Matrix>) -> Result<Self> {
        let mut model = Self::zeros(cfg, num_entities, num_relations);
        let mut targets = model.blocks_mut();
        if targets.len() != blocks.len() {
            return Err(Error::DimensionMismatch(format!("expected {} blocks, found {}", targets.len(), blocks.len())));
        }
        for (i, (dst, src)) in targets.iter_mut().zip(blocks).enumerate() {
            if (dst.rows(), dst.cols()) != (src.rows(), src.cols()) {
                return Err(Error::DimensionMismatch(format!(
                    "block {i}: expected {}x{}, found {}x{}",
                    dst.rows(),
                    dst.cols(),
                    src.rows(),
                    src.cols()
                )));
            }
            **dst = src;
        }
        drop(targets);
        Ok(model)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Rescal(_) => ModelKind::Rescal,
            Self::Emlp(_) => ModelKind::Emlp,
            Self::Ermlp(_) => ModelKind::Ermlp,
            Self::Ntn(_) => ModelKind::Ntn,
            Self::Se(_) => ModelKind::Se,
            Self::Transe(_) => ModelKind::Transe,
        }
    }

    /// The configuration that reproduces this model's shapes.
    pub fn config(&self) -> ModelConfig {
        let mut cfg = ModelConfig::new(self.kind(), self.entity_dim());
        match self {
            Self::Rescal(_) => {}
            Self::Emlp(m) => {
                cfg.hidden_a = m.hidden_dim();
                cfg.nonlinearity = m.nonlinearity;
            }
            Self::Ermlp(m) => {
                cfg.relation_dim = m.relation.cols();
                cfg.hidden_c = m.hidden.cols();
                cfg.nonlinearity = m.nonlinearity;
            }
            Self::Ntn(m) => {
                cfg.hidden_a = m.hidden_a();
                cfg.hidden_b = m.hidden_b();
                cfg.nonlinearity = m.nonlinearity;
            }
            Self::Se(m) => cfg.hidden_a = m.hidden_dim(),
            Self::Transe(m) => cfg.distance = m.distance,
        }
        cfg
    }

    pub fn num_entities(&self) -> usize {
        dispatch!(self, m => m.entity().rows())
    }

    pub fn num_relations(&self) -> usize {
        dispatch!(self, m => m.num_relations())
    }

    pub fn entity_dim(&self) -> usize {
        dispatch!(self, m => m.entity().cols())
    }

    pub fn entity_embeddings(&self) -> &Matrix {
        dispatch!(self, m => m.entity())
    }

    /// Relation embedding rows, for kinds that have them (ER-MLP, TransE).
    pub fn relation_embeddings(&self) -> Option<&Matrix> {
        match self {
            Self::Ermlp(m) => Some(&m.relation),
            Self::Transe(m) => Some(&m.relation),
            _ => None,
        }
    }

    pub fn check(&self, t: &Triple) -> Result<()> {
        let (ne, nr) = (self.num_entities(), self.num_relations());
        if t.subject.index() >= ne || t.object.index() >= ne || t.relation.index() >= nr {
            return Err(Error::DimensionMismatch(format!(
                "triple {t} outside a model with {ne} entities and {nr} relations"
            )));
        }
        Ok(())
    }

    /// `f(t)`; SE and TransE scores are non-positive.
    pub fn score(&self, t: Triple) -> Result<f64> {
        self.check(&t)?;
        Ok(self.score_unchecked(t))
    }

    #[inline]
    pub fn score_unchecked(&self, t: Triple) -> f64 {
        dispatch!(self, m => m.score_of(t))
    }

    /// `∂f(t)/∂θ`, touching only entity rows of `t` and parameters of its relation
    /// (plus global blocks for ER-MLP).
    pub fn score_gradient(&self, t: Triple) -> Result<Gradient> {
        self.check(&t)?;
        let mut g = Gradient::new();
        self.accumulate_score_gradient(t, 1.0, &mut g);
        Ok(g)
    }

    pub fn accumulate_score_gradient(&self, t: Triple, upstream: f64, grad: &mut Gradient) {
        if upstream != 0.0 {
            dispatch!(self, m => m.accumulate(t, upstream, grad))
        }
    }

    /// Parameter blocks with stable names, in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &Matrix)> {
        dispatch!(self, m => m.named_blocks())
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        dispatch!(self, m => m.blocks_mut())
    }

    pub fn param_total(&self) -> usize {
        self.blocks().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, m)| m.is_finite())
    }

    /// `θ ← (θ − rate · g) / (1 + rate · λ)` on the rows `g` touches.
    ///
    /// The L2 penalty is applied in proximal form so that any `λ ≥ 0` shrinks
    /// parameters instead of overshooting. Returns false when nothing changed.
    pub fn apply_step(&mut self, grad: &Gradient, rate: f64, l2: f64) -> bool {
        if rate == 0.0 {
            return false;
        }
        let shrink = 1.0 / (1.0 + rate * l2);
        let mut blocks = self.blocks_mut();
        for r in &grad.rows {
            let row = blocks[r.block].row_mut(r.row);
            for (p, g) in row.iter_mut().zip(&r.values) {
                *p = (*p - rate * g) * shrink;
            }
        }
        drop(blocks);
        if let Self::Transe(m) = self {
            for r in grad.rows.iter().filter(|r| r.block == 0) {
                m.project_entity(r.row);
            }
        }
        true
    }
}

/// Relations closest to `k` by squared Euclidean distance between rows of
/// `relation_embeddings`, excluding `k`, ascending, ties broken by id.
pub fn nearest_relations(relation_embeddings: &Matrix, k: RelationId, top: usize) -> Result<Vec<(RelationId, f64)>> {
    if k.index() >= relation_embeddings.rows() {
        return Err(Error::RelationOutOfRange(k.index()));
    }
    let anchor = relation_embeddings.row(k.index());
    let mut out: Vec<(RelationId, f64)> = (0..relation_embeddings.rows())
        .filter(|&r| r != k.index())
        .map(|r| {
            let d = relation_embeddings.row(r).iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum();
            (RelationId(r as u32), d)
        })
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    out.truncate(top);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ModelKind) -> ModelConfig {
        ModelConfig { kind, entity_dim: 4, relation_dim: 2, hidden_a: 3, hidden_b: 2, hidden_c: 5, ..ModelConfig::new(kind, 4) }
    }

    #[test]
    fn table_parameter_counts() {
        assert_eq!(cfg(ModelKind::Rescal).param_count(10, 3), 88);
        assert_eq!(cfg(ModelKind::Transe).param_count(10, 3), 52);
        assert_eq!(cfg(ModelKind::Ermlp).param_count(10, 3), 101);
    }

    #[test]
    fn counts_match_materialized_models() {
        for kind in ModelKind::ALL {
            let c = cfg(kind);
            let m = LatentModel::init(&c, 7, 3, 1).unwrap();
            assert_eq!(m.param_total(), c.param_count(7, 3), "{kind}");
            assert_eq!(m.config(), LatentModel::zeros(&c, 7, 3).config());
        }
    }

    #[test]
    fn init_is_deterministic_and_transe_rows_are_unit() {
        let c = cfg(ModelKind::Transe);
        let a = LatentModel::init(&c, 9, 2, 5).unwrap();
        assert_eq!(a, LatentModel::init(&c, 9, 2, 5).unwrap());
        assert_ne!(a, LatentModel::init(&c, 9, 2, 6).unwrap());
        let e = a.entity_embeddings();
        for i in 0..e.rows() {
            assert!((crate::linalg::norm_sq(e.row(i)).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(LatentModel::init(&ModelConfig::new(ModelKind::Rescal, 0), 3, 1, 0).is_err());
        let mut c = cfg(ModelKind::Ermlp);
        c.hidden_c = 0;
        assert!(LatentModel::init(&c, 3, 1, 0).is_err());
    }

    #[test]
    fn score_rejects_out_of_range_ids() {
        let m = LatentModel::init(&cfg(ModelKind::Rescal), 3, 1, 0).unwrap();
        assert!(m.score(Triple::new(0, 1, 0)).is_err());
        assert!(m.score(Triple::new(3, 0, 0)).is_err());
        assert!(m.score(Triple::new(2, 0, 1)).is_ok());
    }

    #[test]
    fn nearest_relations_ties_and_truncation() {
        let r = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]]);
        let n = nearest_relations(&r, RelationId(0), 10).unwrap();
        assert_eq!(n.len(), 3);
        assert_eq!(n[0], (RelationId(2), 0.0));
        assert_eq!(n[1], (RelationId(1), 1.0));
        assert_eq!(n[2], (RelationId(3), 1.0));
        assert_eq!(nearest_relations(&r, RelationId(0), 1).unwrap().len(), 1);
    }

    #[test]
    fn zero_rate_leaves_parameters_bitwise_unchanged() {
        for kind in ModelKind::ALL {
            let mut m = LatentModel::init(&cfg(kind), 5, 2, 3).unwrap();
            let before = m.clone();
            let g = m.score_gradient(Triple::new(1, 1, 2)).unwrap();
            assert!(!m.apply_step(&g, 0.0, 0.5));
            assert_eq!(m, before);
        }
    }
}
