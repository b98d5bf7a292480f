use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus};

const P_MIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `−log Ber(y | σ(f))`
    #[default]
    Log,
    /// `(σ(f) − y)²`
    Squared,
    /// `max(margin + f⁻ − f⁺, 0)` over a positive and a negative.
    MarginRanking,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Log => "log",
            Self::Squared => "squared",
            Self::MarginRanking => "margin-ranking",
        }
    }

    pub fn is_pairwise(self) -> bool {
        self == Self::MarginRanking
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" | "log-loss" | "logistic" => Ok(Self::Log),
            "squared" | "squared-loss" | "mse" => Ok(Self::Squared),
            "margin" | "margin-ranking" | "ranking" => Ok(Self::MarginRanking),
            other => Err(Error::InvalidConfig(format!("unknown loss `{other}`"))),
        }
    }
}

/// A loss value, its derivative with respect to the score(s), and whether a
/// probability had to be clamped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: f64,
    pub clamped: bool,
}

/// `−log Ber(y | p)` with `p` clamped to `[1e−12, 1 − 1e−12]`.
pub fn log_loss(p: f64, y: f64) -> LossEval {
    let clamped = !(P_MIN..=1.0 - P_MIN).contains(&p);
    let q = p.clamp(P_MIN, 1.0 - P_MIN);
    let value = -(y * q.ln() + (1.0 - y) * (1.0 - q).ln());
    LossEval { value, grad: (q - y) / (q * (1.0 - q)), clamped }
}

/// `(p − y)²`
pub fn squared_loss(p: f64, y: f64) -> LossEval {
    LossEval { value: (p - y) * (p - y), grad: 2.0 * (p - y), clamped: false }
}

/// `max(margin + f_neg − f_pos, 0)`
pub fn ranking_loss(f_pos: f64, f_neg: f64, margin: f64) -> f64 {
    (margin + f_neg - f_pos).max(0.0)
}

/// Loss of a single labelled score `f` with `p = σ(f)`; `grad` is `dℓ/df`.
///
/// The log loss is evaluated as a softplus so large scores stay exact; the clamp
/// flag reports when `σ(f)` rounds to 0 or 1.
pub fn pointwise(kind: LossKind, f: f64, y: f64) -> LossEval {
    let p = sigmoid(f);
    match kind {
        LossKind::Log | LossKind::MarginRanking => {
            let value = y * softplus(-f) + (1.0 - y) * softplus(f);
            LossEval { value, grad: p - y, clamped: p <= 0.0 || p >= 1.0 }
        }
        LossKind::Squared => LossEval { value: (p - y) * (p - y), grad: 2.0 * (p - y) * p * (1.0 - p), clamped: false },
    }
}

/// Margin ranking loss and its derivative with respect to `f_pos`; the derivative
/// with respect to `f_neg` is the negation.
pub fn pairwise(f_pos: f64, f_neg: f64, margin: f64) -> LossEval {
    let value = ranking_loss(f_pos, f_neg, margin);
    LossEval { value, grad: if value > 0.0 { -1.0 } else { 0.0 }, clamped: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert_eq!(ranking_loss(2.0, 0.5, 1.0), 0.0);
        assert!((ranking_loss(0.2, 0.5, 1.0) - 1.3).abs() < 1e-15);
        assert!((log_loss(0.5, 1.0).value - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn log_loss_clamps_hard_probabilities() {
        let l = log_loss(0.0, 1.0);
        assert!(l.clamped);
        assert!((l.value - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!(!log_loss(0.3, 0.0).clamped);
    }

    #[test]
    fn pointwise_log_matches_probability_form() {
        for f in [-3.0, -0.1, 0.0, 0.7, 4.0] {
            for y in [0.0, 1.0] {
                let a = pointwise(LossKind::Log, f, y).value;
                let b = log_loss(sigmoid(f), y).value;
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pointwise_derivatives_match_differences() {
        let h = 1e-6;
        for kind in [LossKind::Log, LossKind::Squared] {
            for f in [-2.0, -0.3, 0.4, 1.9] {
                for y in [0.0, 1.0] {
                    let num = (pointwise(kind, f + h, y).value - pointwise(kind, f - h, y).value) / (2.0 * h);
                    assert!((num - pointwise(kind, f, y).grad).abs() < 1e-7);
                }
            }
        }
    }
}
