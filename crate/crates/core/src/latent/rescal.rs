use crate::graph::Triple;
use crate::linalg::{dot, Matrix};

use super::{Gradient, Params};

/// Bilinear model `f_ijk = e_iᵀ W_k e_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct RescalParams {
    /// `N_e × H_e`, row `i` is `e_i`.
    pub entity: Matrix,
    /// One `H_e × H_e` interaction matrix per relation.
    pub relation: Vec<Matrix>,
}

impl RescalParams {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        Self { entity: Matrix::zeros(num_entities, dim), relation: vec![Matrix::zeros(dim, dim); num_relations] }
    }

    pub fn dim(&self) -> usize {
        self.entity.cols()
    }

    /// `F_k = E W_k Eᵀ` as a dense matrix. Only for small graphs.
    pub fn score_matrix(&self, k: usize) -> Matrix {
        self.entity.matmul(&self.relation[k]).matmul(&self.entity.transpose())
    }
}

impl Params for RescalParams {
    fn entity(&self) -> &Matrix {
        &self.entity
    }

    fn num_relations(&self) -> usize {
        self.relation.len()
    }

    fn score_of(&self, t: Triple) -> f64 {
        let w = &self.relation[t.relation.index()];
        let ej = self.entity.row(t.object.index());
        dot(&w.tr_mul_vec(self.entity.row(t.subject.index())), ej)
    }

    fn accumulate(&self, t: Triple, upstream: f64, grad: &mut Gradient) {
        let k = t.relation.index();
        let w = &self.relation[k];
        let ei = self.entity.row(t.subject.index());
        let ej = self.entity.row(t.object.index());
        grad.add_row(0, t.subject.index(), upstream, &w.mul_vec(ej));
        grad.add_row(0, t.object.index(), upstream, &w.tr_mul_vec(ei));
        grad.add_outer(1 + k, upstream, ei, ej);
    }

    fn named_blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("entity".to_string(), &self.entity)];
        out.extend(self.relation.iter().enumerate().map(|(k, w)| (format!("relation.{k}"), w)));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.entity];
        out.extend(self.relation.iter_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::LatentModel;

    #[test]
    fn guinness_receives_award_score() {
        let m = RescalParams {
            entity: Matrix::from_rows(&[&[0.9, 0.2], &[0.2, 0.8]]),
            relation: vec![Matrix::from_rows(&[&[0.1, 0.9], &[0.1, 0.1]])],
        };
        // 0.9·(0.1·0.2 + 0.9·0.8) + 0.2·(0.1·0.2 + 0.1·0.8)
        let f = m.score_of(Triple::new(0, 0, 1));
        assert!((f - 0.686).abs() < 1e-12, "{f}");
    }

    #[test]
    fn zero_embeddings_score_zero_and_have_zero_entity_gradient() {
        let mut m = RescalParams::zeros(4, 2, 3);
        m.relation[1] = Matrix::from_fn(3, 3, |a, b| (a * 3 + b) as f64);
        let model = LatentModel::Rescal(m);
        let g = model.score_gradient(Triple::new(0, 1, 2)).unwrap();
        assert_eq!(model.score(Triple::new(0, 1, 2)).unwrap(), 0.0);
        assert!(g.rows.iter().filter(|r| r.block == 0).all(|r| r.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn bilinear_in_subject_and_linear_in_w() {
        let LatentModel::Rescal(mut m) = LatentModel::init(&crate::latent::ModelConfig::new(crate::latent::ModelKind::Rescal, 3), 4, 1, 2).unwrap() else {
            unreachable!()
        };
        let t = Triple::new(0, 0, 1);
        let f = m.score_of(t);
        m.entity.row_mut(0).iter_mut().for_each(|v| *v *= 2.5);
        assert!((m.score_of(t) - 2.5 * f).abs() < 1e-12);
        let f2 = m.score_of(t);
        m.relation[0].scale(-3.0);
        assert!((m.score_of(t) + 3.0 * f2).abs() < 1e-12);
    }
}
