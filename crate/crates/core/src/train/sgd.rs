use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triple, TypeConstraints};
use crate::latent::{Gradient, LatentModel};
use crate::sampling::{NegativeRegime, NegativeSampler};
use crate::seed;

use super::loss::{pairwise, pointwise, LossKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `λ`, the L2 strength applied to the parameter rows each step touches.
    pub l2: f64,
    pub margin: f64,
    pub regime: NegativeRegime,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Log,
            learning_rate: 0.05,
            epochs: 100,
            l2: 1e-4,
            margin: 1.0,
            regime: NegativeRegime::Perturbation,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidConfig("l2 must be >= 0".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::InvalidConfig("margin must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-step loss of each epoch.
    pub trace: Vec<f64>,
    /// Steps in which `σ(f)` saturated at 0 or 1.
    pub clamped: usize,
    /// Positives for which no negative could be drawn.
    pub skipped: usize,
}

/// Loss of one training example and its gradient with respect to the model.
///
/// Pointwise losses score `positive` with label 1 and `negative` (if any) with
/// label 0; the margin loss needs a negative and is 0 otherwise.
pub fn example_gradient(model: &LatentModel, cfg: &TrainConfig, positive: Triple, negative: Option<Triple>) -> (f64, Gradient, bool) {
    let mut grad = Gradient::new();
    let f_pos = model.score_unchecked(positive);
    if cfg.loss.is_pairwise() {
        let Some(neg) = negative else { return (0.0, grad, false) };
        let l = pairwise(f_pos, model.score_unchecked(neg), cfg.margin);
        model.accumulate_score_gradient(positive, l.grad, &mut grad);
        model.accumulate_score_gradient(neg, -l.grad, &mut grad);
        return (l.value, grad, false);
    }
    let lp = pointwise(cfg.loss, f_pos, 1.0);
    model.accumulate_score_gradient(positive, lp.grad, &mut grad);
    let (mut value, mut clamped) = (lp.value, lp.clamped);
    if let Some(neg) = negative {
        let ln = pointwise(cfg.loss, model.score_unchecked(neg), 0.0);
        model.accumulate_score_gradient(neg, ln.grad, &mut grad);
        value += ln.value;
        clamped |= ln.clamped;
    }
    (value, grad, clamped)
}

/// Plain SGD over `positives`, one regime-matched negative per positive per step.
///
/// `known` lists every positive negatives must avoid. Each epoch visits the
/// positives in a seeded order. The trajectory depends only on the inputs and
/// `cfg.seed`. If a loss or parameter becomes non-finite, `model` is restored to
/// its state at the start of the failing epoch and an error is returned.
pub fn sgd_train(
    model: &mut LatentModel,
    positives: &[Triple],
    known: &KnowledgeGraph,
    constraints: &TypeConstraints,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    for t in positives {
        model.check(t)?;
    }
    let sampler = NegativeSampler::new(known, constraints, cfg.regime);
    let mut rng = seed::derive_rng(cfg.seed, "sgd");
    let mut order: Vec<Triple> = positives.to_vec();
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        let checkpoint = model.clone();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &pos in &order {
            let neg = sampler.sample(&mut rng, pos).map(|n| n.triple);
            if neg.is_none() {
                report.skipped += 1;
            }
            let (value, grad, clamped) = example_gradient(model, cfg, pos, neg);
            report.clamped += clamped as usize;
            if !value.is_finite() {
                *model = checkpoint;
                return Err(Error::Numerical(format!("non-finite loss in epoch {}; parameters restored", epoch + 1)));
            }
            total += value;
            model.apply_step(&grad, cfg.learning_rate, cfg.l2);
        }
        if !model.is_finite() {
            *model = checkpoint;
            return Err(Error::Numerical(format!("non-finite parameters after epoch {}; parameters restored", epoch + 1)));
        }
        report.trace.push(if order.is_empty() { 0.0 } else { total / order.len() as f64 });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::infer_type_constraints;
    use crate::latent::{ModelConfig, ModelKind};
    use crate::synth;

    #[test]
    fn zero_rate_is_a_no_op() {
        let kg = synth::translation_grid(4, 3);
        let tc = infer_type_constraints(&kg);
        let mut m = LatentModel::init(&ModelConfig::new(ModelKind::Transe, 3), kg.num_entities(), kg.num_relations(), 1).unwrap();
        let before = m.clone();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, ..TrainConfig::default() };
        sgd_train(&mut m, kg.triples(), &kg, &tc, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let kg = synth::random_graph(12, 2, 30, 3);
        let tc = infer_type_constraints(&kg);
        let run = || {
            let mut m = LatentModel::init(&ModelConfig::new(ModelKind::Rescal, 3), 12, 2, 4).unwrap();
            let r = sgd_train(&mut m, kg.triples(), &kg, &tc, &TrainConfig { epochs: 5, ..TrainConfig::default() }).unwrap();
            (m, r)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { l2: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() }.validate().is_err());
    }
}
