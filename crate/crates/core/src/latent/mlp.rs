use crate::graph::Triple;
use crate::linalg::{dot, Matrix};

use super::{Gradient, Nonlinearity, Params};

/// Backpropagate through `f = wᵀ g(Aᵀ φ)`; returns `(g(h), δ = w ∘ g'(h))`.
fn hidden_layer(a: &Matrix, phi: &[f64], w: &[f64], g: Nonlinearity) -> (Vec<f64>, Vec<f64>, f64) {
    let h = a.tr_mul_vec(phi);
    let act: Vec<f64> = h.iter().map(|&u| g.apply(u)).collect();
    let delta: Vec<f64> = h.iter().zip(w).map(|(&u, &wi)| wi * g.derivative(u)).collect();
    let f = dot(w, &act);
    (act, delta, f)
}

/// E-MLP: `f_ijk = w_kᵀ g(A_kᵀ [e_i; e_j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmlpParams {
    pub entity: Matrix,
    /// Per relation `A_k = [A_kˢ; A_kᵒ]`, shape `2H_e × H_a`.
    pub hidden: Vec<Matrix>,
    /// `N_r × H_a`, row `k` is `w_k`.
    pub output: Matrix,
    pub nonlinearity: Nonlinearity,
}

impl EmlpParams {
    pub fn zeros(ne: usize, nr: usize, he: usize, ha: usize, g: Nonlinearity) -> Self {
        Self { entity: Matrix::zeros(ne, he), hidden: vec![Matrix::zeros(2 * he, ha); nr], output: Matrix::zeros(nr, ha), nonlinearity: g }
    }

    pub fn hidden_dim(&self) -> usize {
        self.output.cols()
    }

    fn phi(&self, t: Triple) -> Vec<f64> {
        [self.entity.row(t.subject.index()), self.entity.row(t.object.index())].concat()
    }
}

impl Params for EmlpParams {
    fn entity(&self) -> &Matrix {
        &self.entity
    }

    fn num_relations(&self) -> usize {
        self.hidden.len()
    }

    fn score_of(&self, t: Triple) -> f64 {
        let k = t.relation.index();
        hidden_layer(&self.hidden[k], &self.phi(t), self.output.row(k), self.nonlinearity).2
    }

    fn accumulate(&self, t: Triple, upstream: f64, grad: &mut Gradient) {
        let k = t.relation.index();
        let nr = self.hidden.len();
        let he = self.entity.cols();
        let phi = self.phi(t);
        let (act, delta, _) = hidden_layer(&self.hidden[k], &phi, self.output.row(k), self.nonlinearity);
        grad.add_row(1 + nr, k, upstream, &act);
        grad.add_outer(1 + k, upstream, &phi, &delta);
        let dphi = self.hidden[k].mul_vec(&delta);
        grad.add_row(0, t.subject.index(), upstream, &dphi[..he]);
        grad.add_row(0, t.object.index(), upstream, &dphi[he..]);
    }

    fn named_blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("entity".to_string(), &self.entity)];
        out.extend(self.hidden.iter().enumerate().map(|(k, a)| (format!("hidden.{k}"), a)));
        out.push(("output".to_string(), &self.output));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.entity];
        out.extend(self.hidden.iter_mut());
        out.push(&mut self.output);
        out
    }
}

/// ER-MLP: `f_ijk = wᵀ g(Cᵀ [e_i; e_j; r_k])` with a global `C` and `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErmlpParams {
    pub entity: Matrix,
    /// `N_r × H_r`, row `k` is `r_k`.
    pub relation: Matrix,
    /// `C`, shape `(2H_e + H_r) × H_c`.
    pub hidden: Matrix,
    /// `1 × H_c`
    pub output: Matrix,
    pub nonlinearity: Nonlinearity,
}

impl ErmlpParams {
    pub fn zeros(ne: usize, nr: usize, he: usize, hr: usize, hc: usize, g: Nonlinearity) -> Self {
        Self {
            entity: Matrix::zeros(ne, he),
            relation: Matrix::zeros(nr, hr),
            hidden: Matrix::zeros(2 * he + hr, hc),
            output: Matrix::zeros(1, hc),
            nonlinearity: g,
        }
    }

    fn phi(&self, t: Triple) -> Vec<f64> {
        [self.entity.row(t.subject.index()), self.entity.row(t.object.index()), self.relation.row(t.relation.index())].concat()
    }
}

impl Params for ErmlpParams {
    fn entity(&self) -> &Matrix {
        &self.entity
    }

    fn num_relations(&self) -> usize {
        self.relation.rows()
    }

    fn score_of(&self, t: Triple) -> f64 {
        hidden_layer(&self.hidden, &self.phi(t), self.output.row(0), self.nonlinearity).2
    }

    fn accumulate(&self, t: Triple, upstream: f64, grad: &mut Gradient) {
        let he = self.entity.cols();
        let phi = self.phi(t);
        let (act, delta, _) = hidden_layer(&self.hidden, &phi, self.output.row(0), self.nonlinearity);
        grad.add_row(3, 0, upstream, &act);
        grad.add_outer(2, upstream, &phi, &delta);
        let dphi = self.hidden.mul_vec(&delta);
        grad.add_row(0, t.subject.index(), upstream, &dphi[..he]);
        grad.add_row(0, t.object.index(), upstream, &dphi[he..2 * he]);
        grad.add_row(1, t.relation.index(), upstream, &dphi[2 * he..]);
    }

    fn named_blocks(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("entity".to_string(), &self.entity),
            ("relation".to_string(), &self.relation),
            ("hidden".to_string(), &self.hidden),
            ("output".to_string(), &self.output),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.entity, &mut self.relation, &mut self.hidden, &mut self.output]
    }
}
