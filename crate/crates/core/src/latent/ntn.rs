use crate::graph::Triple;
use crate::linalg::{dot, Matrix};

use super::{Gradient, Nonlinearity, Params, RescalParams};

/// Neural tensor network: `f_ijk = w_kᵀ g([h_a; h_b])` with the additive layer
/// `h_a = A_kᵀ [e_i; e_j]` and the bilinear layer `h_b[l] = e_iᵀ B_kˡ e_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NtnParams {
    pub entity: Matrix,
    /// Per relation `A_k`, shape `2H_e × H_a`.
    pub additive: Vec<Matrix>,
    /// Per relation the `H_b` slices `B_kˡ` stacked vertically: `(H_b·H_e) × H_e`.
    pub bilinear: Vec<Matrix>,
    /// `N_r × (H_a + H_b)`, row `k` is `w_k`.
    pub output: Matrix,
    pub nonlinearity: Nonlinearity,
}

impl NtnParams {
    pub fn zeros(ne: usize, nr: usize, he: usize, ha: usize, hb: usize, g: Nonlinearity) -> Self {
        Self {
            entity: Matrix::zeros(ne, he),
            additive: vec![Matrix::zeros(2 * he, ha); nr],
            bilinear: vec![Matrix::zeros(hb * he, he); nr],
            output: Matrix::zeros(nr, ha + hb),
            nonlinearity: g,
        }
    }

    pub fn hidden_a(&self) -> usize {
        self.additive.first().map_or(self.output.cols(), Matrix::cols)
    }

    pub fn hidden_b(&self) -> usize {
        self.output.cols() - self.hidden_a()
    }

    /// Slice `B_kˡ` as a row range of the stacked matrix.
    fn slice_row(&self, k: usize, l: usize, a: usize) -> &[f64] {
        self.bilinear[k].row(l * self.entity.cols() + a)
    }

    /// Pre-activations `[h_a; h_b]`.
    fn pre_activation(&self, t: Triple) -> Vec<f64> {
        let k = t.relation.index();
        let ei = self.entity.row(t.subject.index());
        let ej = self.entity.row(t.object.index());
        let phi = [ei, ej].concat();
        let mut u = self.additive[k].tr_mul_vec(&phi);
        for l in 0..self.hidden_b() {
            let v: f64 = ei.iter().enumerate().map(|(a, &x)| x * dot(self.slice_row(k, l, a), ej)).sum();
            u.push(v);
        }
        u
    }
}

impl Params for NtnParams {
    fn entity(&self) -> &Matrix {
        &self.entity
    }

    fn num_relations(&self) -> usize {
        self.output.rows()
    }

    fn score_of(&self, t: Triple) -> f64 {
        let g = self.nonlinearity;
        let u = self.pre_activation(t);
        dot(self.output.row(t.relation.index()), &u.iter().map(|&x| g.apply(x)).collect::<Vec<_>>())
    }

    fn accumulate(&self, t: Triple, upstream: f64, grad: &mut Gradient) {
        let k = t.relation.index();
        let nr = self.num_relations();
        let he = self.entity.cols();
        let ha = self.hidden_a();
        let g = self.nonlinearity;
        let ei = self.entity.row(t.subject.index());
        let ej = self.entity.row(t.object.index());
        let u = self.pre_activation(t);
        let w = self.output.row(k);
        let act: Vec<f64> = u.iter().map(|&x| g.apply(x)).collect();
        let delta: Vec<f64> = u.iter().zip(w).map(|(&x, &wi)| wi * g.derivative(x)).collect();

        grad.add_row(1 + nr, k, upstream, &act);

        let phi = [ei, ej].concat();
        grad.add_outer(1 + k, upstream, &phi, &delta[..ha]);
        let dphi = self.additive[k].mul_vec(&delta[..ha]);
        let mut dei = dphi[..he].to_vec();
        let mut dej = dphi[he..].to_vec();

        let b_block = 2 + nr + k;
        for (l, &d) in delta[ha..].iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (a, &x) in ei.iter().enumerate() {
                let row = self.slice_row(k, l, a);
                grad.add_row(b_block, l * he + a, upstream * d * x, ej);
                dei[a] += d * dot(row, ej);
                crate::linalg::axpy(d * x, row, &mut dej);
            }
        }
        grad.add_row(0, t.subject.index(), upstream, &dei);
        grad.add_row(0, t.object.index(), upstream, &dej);
    }

    fn named_blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("entity".to_string(), &self.entity)];
        out.extend(self.additive.iter().enumerate().map(|(k, a)| (format!("additive.{k}"), a)));
        out.push(("output".to_string(), &self.output));
        out.extend(self.bilinear.iter().enumerate().map(|(k, b)| (format!("bilinear.{k}"), b)));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.entity];
        out.extend(self.additive.iter_mut());
        out.push(&mut self.output);
        out.extend(self.bilinear.iter_mut());
        out
    }
}

/// Express a RESCAL model as an NTN with the same scores.
///
/// `H_b = H_e²` slices, slice `a + b·H_e` is the indicator `δ_{a,b}`, there is no
/// additive layer, `g` is the identity and `w_k = vec(W_k)` (column-major), so that
/// `h_b = e_j ⊗ e_i` and `w_kᵀ h_b = e_iᵀ W_k e_j`.
pub fn ntn_from_rescal(m: &RescalParams) -> NtnParams {
    let he = m.dim();
    let nr = m.relation.len();
    let hb = he * he;
    let mut out = NtnParams::zeros(m.entity.rows(), nr, he, 0, hb, Nonlinearity::Identity);
    out.entity = m.entity.clone();
    for k in 0..nr {
        for b in 0..he {
            for a in 0..he {
                let l = a + b * he;
                out.bilinear[k].set(l * he + a, b, 1.0);
                out.output.set(k, l, m.relation[k].get(a, b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{LatentModel, ModelConfig, ModelKind};

    #[test]
    fn appendix_construction_preserves_scores() {
        let cfg = ModelConfig::new(ModelKind::Rescal, 3);
        let LatentModel::Rescal(r) = LatentModel::init(&cfg, 6, 2, 9).unwrap() else { unreachable!() };
        let n = ntn_from_rescal(&r);
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..2 {
                    let t = Triple::new(i, k, j);
                    assert!((n.score_of(t) - r.score_of(t)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_dimensional_case() {
        let r = RescalParams { entity: Matrix::from_rows(&[&[2.0], &[-1.5]]), relation: vec![Matrix::from_rows(&[&[0.7]])] };
        let n = ntn_from_rescal(&r);
        assert_eq!(n.hidden_a(), 0);
        assert_eq!(n.hidden_b(), 1);
        assert_eq!(n.bilinear[0], Matrix::from_rows(&[&[1.0]]));
        assert_eq!(n.output.row(0), &[0.7]);
    }

    #[test]
    fn slices_sum_to_all_ones() {
        let r = RescalParams::zeros(2, 1, 3);
        let n = ntn_from_rescal(&r);
        let mut total = Matrix::zeros(3, 3);
        for l in 0..9 {
            for a in 0..3 {
                for b in 0..3 {
                    total.set(a, b, total.get(a, b) + n.bilinear[0].get(l * 3 + a, b));
                }
            }
        }
        assert!(total.as_slice().iter().all(|&v| v == 1.0));
    }
}
