//! Stacking: a logistic fusion layer over the outputs of separately trained
//! scorers, optionally with extra per-triple feature columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::graphfeat::logistic::{check_both_classes, fit_logistic, LogisticOptions};
use crate::linalg::{dot, sigmoid, Matrix};
use crate::train::TripleScorer;

/// Fusion weights over standardised input columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-column mean and scale used to standardise inputs.
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Number of leading columns that are base scores; the rest are extra features.
    pub num_base: usize,
}

impl StackedModel {
    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    /// Fused logit of one input row.
    pub fn logit(&self, inputs: &[f64]) -> Result<f64> {
        if inputs.len() != self.arity() {
            return Err(Error::DimensionMismatch(format!("expected {} inputs, got {}", self.arity(), inputs.len())));
        }
        Ok(self.logit_unchecked(inputs))
    }

    fn logit_unchecked(&self, inputs: &[f64]) -> f64 {
        let z: Vec<f64> = inputs.iter().zip(&self.center).zip(&self.scale).map(|((x, c), s)| (x - c) / s).collect();
        dot(&self.weights, &z) + self.bias
    }

    pub fn probability(&self, inputs: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(inputs)?))
    }
}

/// Fit the fusion layer on `inputs` (one row per held-out triple, base scores
/// first, then `num_extra` extra features) and `labels`.
///
/// The rows must come from data the base scorers were not trained on.
pub fn fit_stacker(inputs: &Matrix, labels: &[bool], num_extra: usize, l2: f64) -> Result<StackedModel> {
    let m = inputs.cols();
    if m == 0 || num_extra >= m {
        return Err(Error::InvalidConfig("stacking needs at least one base score column".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
    if y.len() != inputs.rows() {
        return Err(Error::DimensionMismatch(format!("{} rows, {} labels", inputs.rows(), y.len())));
    }
    check_both_classes(&y)?;
    let n = inputs.rows() as f64;
    let center: Vec<f64> = (0..m).map(|c| (0..inputs.rows()).map(|r| inputs.get(r, c)).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..m)
        .map(|c| {
            let var = (0..inputs.rows()).map(|r| (inputs.get(r, c) - center[c]).powi(2)).sum::<f64>() / n;
            if var > 0.0 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let z = Matrix::from_fn(inputs.rows(), m, |r, c| (inputs.get(r, c) - center[c]) / scale[c]);
    let fit = fit_logistic(&z, &y, None, None, LogisticOptions { l1: 0.0, l2, tol: 1e-12, max_iter: 50_000 })?;
    Ok(StackedModel { weights: fit.weights, bias: fit.bias, center, scale, num_base: m - num_extra })
}

/// Per-triple extra feature columns appended after the base scores.
pub trait ExtraFeatures: Sync {
    fn count(&self) -> usize;
    fn features(&self, t: Triple) -> Vec<f64>;
}

/// Base scorers plus a fitted fusion layer.
pub struct StackedScorer<'a> {
    pub base: Vec<&'a dyn TripleScorer>,
    pub extra: Option<&'a dyn ExtraFeatures>,
    pub model: StackedModel,
}

impl StackedScorer<'_> {
    pub fn inputs(&self, t: Triple) -> Vec<f64> {
        let mut row: Vec<f64> = self.base.iter().map(|s| s.score_triple(t)).collect();
        if let Some(x) = self.extra {
            row.extend(x.features(t));
        }
        row
    }
}

impl TripleScorer for StackedScorer<'_> {
    fn score_triple(&self, t: Triple) -> f64 {
        self.model.logit_unchecked(&self.inputs(t))
    }
}

/// Input matrix for `triples` from `base` scorers and optional extra features.
pub fn stack_inputs(base: &[&dyn TripleScorer], extra: Option<&dyn ExtraFeatures>, triples: &[Triple]) -> Matrix {
    let m = base.len() + extra.map_or(0, |x| x.count());
    let mut data = Vec::with_capacity(triples.len() * m);
    for &t in triples {
        data.extend(base.iter().map(|s| s.score_triple(t)));
        if let Some(x) = extra {
            data.extend(x.features(t));
        }
    }
    Matrix::from_vec(triples.len(), m, data).expect("row length matches column count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_keep_the_ranking() {
        let s: Vec<f64> = (0..30).map(|i| ((i * 37) % 17) as f64 / 4.0).collect();
        let labels: Vec<bool> = s.iter().enumerate().map(|(i, &x)| x > 2.0 || i % 7 == 0).collect();
        let x = Matrix::from_fn(s.len(), 2, |r, _| s[r]);
        let m = fit_stacker(&x, &labels, 0, 1e-4).unwrap();
        for a in 0..s.len() {
            for b in 0..s.len() {
                if s[a] < s[b] {
                    assert!(m.logit(&[s[a], s[a]]).unwrap() < m.logit(&[s[b], s[b]]).unwrap());
                }
            }
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::from_fn(4, 2, |r, c| (r + c) as f64);
        assert!(fit_stacker(&x, &[true; 4], 0, 1e-4).is_err());
    }
}
