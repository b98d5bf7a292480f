//! Penalised logistic regression by accelerated proximal gradient.
//!
//! Minimises `(1/n) Σ [softplus(z_n) − y_n z_n] + l1 ‖w‖₁ + (l2/2) ‖w‖²` with
//! `z = X w + b + offset`. The bias is never penalised. The step is fixed at the
//! reciprocal of a Lipschitz bound of the smooth part, and the monotone variant of
//! the accelerated scheme is used so the objective never increases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub l1: f64,
    pub l2: f64,
    /// Converged once a plain proximal step from the iterate lowers the
    /// objective by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { l1: 0.0, l2: 0.0, tol: 1e-8, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective after each iteration, starting with the initial point.
    pub trace: Vec<f64>,
    pub converged: bool,
}

struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    offset: Option<&'a [f64]>,
    opts: LogisticOptions,
}

impl Problem<'_> {
    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        let mut z = self.x.mul_vec(w);
        for (n, zn) in z.iter_mut().enumerate() {
            *zn += b + self.offset.map_or(0.0, |o| o[n]);
        }
        z
    }

    fn smooth(&self, w: &[f64], b: f64) -> f64 {
        let z = self.margins(w, b);
        let data: f64 = z.iter().zip(self.y).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / self.n();
        data + 0.5 * self.opts.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn objective(&self, w: &[f64], b: f64) -> f64 {
        self.smooth(w, b) + self.opts.l1 * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let z = self.margins(w, b);
        let r: Vec<f64> = z.iter().zip(self.y).map(|(&z, &y)| (sigmoid(z) - y) / self.n()).collect();
        let mut gw = self.x.tr_mul_vec(&r);
        for (g, v) in gw.iter_mut().zip(w) {
            *g += self.opts.l2 * v;
        }
        (gw, r.iter().sum())
    }

    /// Proximal step of length `step` from `(w, b)`.
    fn prox_step(&self, w: &[f64], b: f64, step: f64) -> (Vec<f64>, f64) {
        let (gw, gb) = self.gradient(w, b);
        let thresh = step * self.opts.l1;
        let w = w
            .iter()
            .zip(&gw)
            .map(|(v, g)| {
                let u = v - step * g;
                u.signum() * (u.abs() - thresh).max(0.0)
            })
            .collect();
        (w, b - step * gb)
    }
}

/// Fit from the starting point `(w0, b0)`; `y` holds labels in `{0, 1}`.
pub fn fit_logistic(
    x: &Matrix,
    y: &[f64],
    offset: Option<&[f64]>,
    start: Option<(&[f64], f64)>,
    opts: LogisticOptions,
) -> Result<LogisticFit> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || y.len() != n || offset.is_some_and(|o| o.len() != n) {
        return Err(Error::DimensionMismatch(format!("{n} rows, {} labels", y.len())));
    }
    if !(opts.l1 >= 0.0 && opts.l2 >= 0.0) {
        return Err(Error::InvalidConfig("penalties must be non-negative".into()));
    }
    if !x.is_finite() || offset.is_some_and(|o| o.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical("non-finite logistic inputs".into()));
    }
    let problem = Problem { x, y, offset, opts };
    // σ' ≤ 1/4 and ‖[X, 1]‖₂² ≤ ‖[X, 1]‖_F².
    let lipschitz = 0.25 * (x.frobenius_sq() + n as f64) / n as f64 + opts.l2;
    let step = 1.0 / lipschitz;

    let (mut w, mut b) = match start {
        Some((w0, b0)) if w0.len() == d => (w0.to_vec(), b0),
        Some(_) => return Err(Error::DimensionMismatch("starting weights".into())),
        None => (vec![0.0; d], 0.0),
    };
    let mut obj = problem.objective(&w, b);
    let mut trace = vec![obj];
    let (mut yw, mut yb) = (w.clone(), b);
    let mut t = 1.0f64;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let (zw, zb) = problem.prox_step(&yw, yb, step);
        let z_obj = problem.objective(&zw, zb);
        let (prev_w, prev_b) = (w.clone(), b);
        if z_obj <= obj {
            w = zw.clone();
            b = zb;
            obj = z_obj;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let (c1, c2) = (t / t_next, (t - 1.0) / t_next);
        yw = w.iter().zip(&zw).zip(&prev_w).map(|((x, z), p)| x + c1 * (z - x) + c2 * (x - p)).collect();
        yb = b + c1 * (zb - b) + c2 * (b - prev_b);
        t = t_next;
        trace.push(obj);
        if !obj.is_finite() {
            return Err(Error::Numerical("logistic objective is not finite".into()));
        }
        let (pw, pb) = problem.prox_step(&w, b, step);
        let p_obj = problem.objective(&pw, pb);
        if obj - p_obj < opts.tol {
            if p_obj < obj {
                w = pw;
                b = pb;
                obj = p_obj;
                trace.push(obj);
            }
            converged = true;
            break;
        }
    }
    Ok(LogisticFit { weights: w, bias: b, trace, converged })
}

/// Both labels must occur.
pub fn check_both_classes(y: &[f64]) -> Result<()> {
    let pos = y.iter().filter(|&&v| v > 0.5).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Degenerate("labels contain a single class".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_fn(40, 3, |i, j| ((i * (j + 3) + 7 * j) % 11) as f64 / 10.0);
        let y = (0..40).map(|i| if (x.get(i, 0) - x.get(i, 2) + 0.1 * (i % 3) as f64) > 0.0 { 1.0 } else { 0.0 }).collect();
        (x, y)
    }

    #[test]
    fn objective_never_increases() {
        let (x, y) = fixture();
        let fit = fit_logistic(&x, &y, None, None, LogisticOptions { l1: 0.01, ..Default::default() }).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(fit.converged);
    }

    #[test]
    fn huge_penalty_leaves_only_the_base_rate() {
        let (x, y) = fixture();
        let fit = fit_logistic(&x, &y, None, None, LogisticOptions { l1: 1e6, tol: 1e-14, ..Default::default() }).unwrap();
        assert!(fit.weights.iter().all(|&w| w == 0.0));
        let rate = y.iter().sum::<f64>() / y.len() as f64;
        assert!((fit.bias - (rate / (1.0 - rate)).ln()).abs() < 1e-4);
    }

    #[test]
    fn stationarity_without_penalty() {
        let (x, y) = fixture();
        let fit = fit_logistic(&x, &y, None, None, LogisticOptions { l2: 0.1, tol: 1e-14, ..Default::default() }).unwrap();
        let p = Problem { x: &x, y: &y, offset: None, opts: LogisticOptions { l2: 0.1, ..Default::default() } };
        let (gw, gb) = p.gradient(&fit.weights, fit.bias);
        assert!(gw.iter().chain([&gb]).all(|g| g.abs() < 1e-5), "{gw:?} {gb}");
    }
}
