//! Platt scaling: `p = σ(a·s + b)` fitted by Newton's method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus};

pub const MAX_SLOPE: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlattCalibrator {
    pub a: f64,
    pub b: f64,
    /// The slope hit `±MAX_SLOPE` (the scores separate the classes).
    pub capped: bool,
}

impl PlattCalibrator {
    pub fn logit(&self, score: f64) -> f64 {
        self.a * score + self.b
    }

    pub fn probability(&self, score: f64) -> f64 {
        sigmoid(self.logit(score))
    }
}

fn nll(scores: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    scores.iter().zip(y).map(|(&s, &y)| {
        let z = a * s + b;
        softplus(z) - y * z
    }).sum()
}

/// Maximum-likelihood `(a, b)` for labels `labels` given `scores`.
pub fn platt_calibrate(scores: &[f64], labels: &[bool]) -> Result<PlattCalibrator> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Degenerate("Platt scaling needs both classes".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
    let n = y.len() as f64;
    let base = (pos as f64 / (n - pos as f64)).ln();
    let first = scores[0];
    if scores.iter().all(|&s| s == first) {
        return Ok(PlattCalibrator { a: 0.0, b: base, capped: false });
    }
    let extreme = |want: bool, pick: fn(f64, f64) -> f64, init: f64| {
        scores.iter().zip(labels).filter(|(_, &l)| l == want).fold(init, |m, (&s, _)| pick(m, s))
    };
    let (pos_min, pos_max) = (extreme(true, f64::min, f64::INFINITY), extreme(true, f64::max, f64::NEG_INFINITY));
    let (neg_min, neg_max) = (extreme(false, f64::min, f64::INFINITY), extreme(false, f64::max, f64::NEG_INFINITY));
    // Perfectly separable: the likelihood has no maximiser, so the slope is capped
    // and the boundary placed midway between the classes.
    if neg_max < pos_min {
        let mid = (neg_max + pos_min) / 2.0;
        return Ok(PlattCalibrator { a: MAX_SLOPE, b: -MAX_SLOPE * mid, capped: true });
    }
    if pos_max < neg_min {
        let mid = (pos_max + neg_min) / 2.0;
        return Ok(PlattCalibrator { a: -MAX_SLOPE, b: MAX_SLOPE * mid, capped: true });
    }
    let (mut a, mut b) = (0.0, base);
    let mut f = nll(scores, &y, a, b);
    let mut capped = false;
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &yy) in scores.iter().zip(&y) {
            let p = sigmoid(a * s + b);
            let w = p * (1.0 - p);
            ga += (p - yy) * s;
            gb += p - yy;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        if ga.abs().max(gb.abs()) < 1e-10 * n {
            break;
        }
        // Tiny ridge keeps the system solvable when the fit saturates.
        let (haa, hbb) = (haa + 1e-12 * n, hbb + 1e-12 * n);
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det);
        if !da.is_finite() || !db.is_finite() {
            (da, db) = (ga, gb);
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let mut na = a - step * da;
            let nb = b - step * db;
            let hit = na.abs() >= MAX_SLOPE;
            if hit {
                na = na.clamp(-MAX_SLOPE, MAX_SLOPE);
            }
            let nf = nll(scores, &y, na, nb);
            if nf <= f {
                moved = nf < f || (na, nb) != (a, b);
                capped |= hit;
                (a, b, f) = (na, nb, nf);
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(PlattCalibrator { a, b, capped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn recovers_the_generating_logistic() {
        let mut rng = crate::seed::rng(42);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let scores: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.random_bool(sigmoid(s))).collect();
        let c = platt_calibrate(&scores, &labels).unwrap();
        assert!((c.a - 1.0).abs() < 0.05 && c.b.abs() < 0.05, "{c:?}");
    }

    #[test]
    fn constant_scores_give_the_base_rate() {
        let c = platt_calibrate(&[0.7; 8], &[true, false, false, false, true, false, false, false]).unwrap();
        assert_eq!(c.a, 0.0);
        assert!((c.probability(0.7) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn separable_scores_cap_the_slope() {
        let c = platt_calibrate(&[-2.0, -1.0, 1.0, 2.0], &[false, false, true, true]).unwrap();
        assert!(c.capped && c.a == MAX_SLOPE, "{c:?}");
    }

    #[test]
    fn positive_slope_preserves_order() {
        let scores = [0.3, -1.0, 2.0, 0.1, 0.5];
        let c = platt_calibrate(&scores, &[true, false, true, false, false]).unwrap();
        assert!(c.a > 0.0);
        for x in scores {
            for z in scores {
                if x < z {
                    assert!(c.probability(x) < c.probability(z));
                }
            }
        }
    }
}
