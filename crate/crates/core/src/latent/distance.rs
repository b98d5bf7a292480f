use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::linalg::{dot, norm_sq, Matrix};

use super::{Distance, Gradient, Params};

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Structured embeddings: `f_ijk = −‖A_kˢ e_i − A_kᵒ e_j‖₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeParams {
    pub entity: Matrix,
    /// Per relation `A_kˢ`, shape `H_a × H_e`.
    pub subject_map: Vec<Matrix>,
    /// Per relation `A_kᵒ`, shape `H_a × H_e`.
    pub object_map: Vec<Matrix>,
}

impl SeParams {
    pub fn zeros(ne: usize, nr: usize, he: usize, ha: usize) -> Self {
        Self { entity: Matrix::zeros(ne, he), subject_map: vec![Matrix::zeros(ha, he); nr], object_map: vec![Matrix::zeros(ha, he); nr] }
    }

    pub fn hidden_dim(&self) -> usize {
        self.subject_map.first().map_or(0, Matrix::rows)
    }

    fn difference(&self, t: Triple) -> Vec<f64> {
        let k = t.relation.index();
        let s = self.subject_map[k].mul_vec(self.entity.row(t.subject.index()));
        let o = self.object_map[k].mul_vec(self.entity.row(t.object.index()));
        s.iter().zip(&o).map(|(a, b)| a - b).collect()
    }
}

impl Params for SeParams {
    fn entity(&self) -> &Matrix {
        &self.entity
    }

    fn num_relations(&self) -> usize {
        self.subject_map.len()
    }

    fn score_of(&self, t: Triple) -> f64 {
        -self.difference(t).iter().map(|d| d.abs()).sum::<f64>()
    }

    fn accumulate(&self, t: Triple, upstream: f64, grad: &mut Gradient) {
        let k = t.relation.index();
        let nr = self.num_relations();
        let ei = self.entity.row(t.subject.index());
        let ej = self.entity.row(t.object.index());
        // ∂f/∂d = −sign(d)
        let s: Vec<f64> = self.difference(t).iter().map(|&d| -sign(d)).collect();
        grad.add_outer(1 + k, upstream, &s, ei);
        grad.add_outer(1 + nr + k, -upstream, &s, ej);
        grad.add_row(0, t.subject.index(), upstream, &self.subject_map[k].tr_mul_vec(&s));
        grad.add_row(0, t.object.index(), -upstream, &self.object_map[k].tr_mul_vec(&s));
    }

    fn named_blocks(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("entity".to_string(), &self.entity)];
        out.extend(self.subject_map.iter().enumerate().map(|(k, a)| (format!("subject_map.{k}"), a)));
        out.extend(self.object_map.iter().enumerate().map(|(k, a)| (format!("object_map.{k}"), a)));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.entity];
        out.extend(self.subject_map.iter_mut());
        out.extend(self.object_map.iter_mut());
        out
    }
}

/// TransE: `f_ijk = −d(e_i + r_k, e_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TranseParams {
    pub entity: Matrix,
    /// `N_r × H_e`, row `k` is `r_k`.
    pub relation: Matrix,
    pub distance: Distance,
}

impl TranseParams {
    pub fn zeros(ne: usize, nr: usize, he: usize, distance: Distance) -> Self {
        Self { entity: Matrix::zeros(ne, he), relation: Matrix::zeros(nr, he), distance }
    }

    pub fn normalize_entity(&mut self, i: usize) {
        let row = self.entity.row_mut(i);
        let n = norm_sq(row).sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }

    /// Scale row `i` back onto the unit ball if it left it.
    pub fn project_entity(&mut self, i: usize) {
        let row = self.entity.row_mut(i);
        let n = norm_sq(row).sqrt();
        if n > 1.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }

    pub fn normalize_entities(&mut self) {
        for i in 0..self.entity.rows() {
            self.normalize_entity(i);
        }
    }

    fn translation_residual(&self, t: Triple) -> Vec<f64> {
        let ei = self.entity.row(t.subject.index());
        let ej = self.entity.row(t.object.index());
        let r = self.relation.row(t.relation.index());
        ei.iter().zip(r).zip(ej).map(|((a, b), c)| a + b - c).collect()
    }
}

impl Params for TranseParams {
    fn entity(&self) -> &Matrix {
        &self.entity
    }

    fn num_relations(&self) -> usize {
        self.relation.rows()
    }

    fn score_of(&self, t: Triple) -> f64 {
        let d = self.translation_residual(t);
        match self.distance {
            Distance::SquaredEuclidean => -norm_sq(&d),
            Distance::L1 => -d.iter().map(|x| x.abs()).sum::<f64>(),
        }
    }

    fn accumulate(&self, t: Triple, upstream: f64, grad: &mut Gradient) {
        let d = self.translation_residual(t);
        let df: Vec<f64> = match self.distance {
            Distance::SquaredEuclidean => d.iter().map(|x| -2.0 * x).collect(),
            Distance::L1 => d.iter().map(|&x| -sign(x)).collect(),
        };
        grad.add_row(0, t.subject.index(), upstream, &df);
        grad.add_row(0, t.object.index(), -upstream, &df);
        grad.add_row(1, t.relation.index(), upstream, &df);
    }

    fn named_blocks(&self) -> Vec<(String, &Matrix)> {
        vec![("entity".to_string(), &self.entity), ("relation".to_string(), &self.relation)]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.entity, &mut self.relation]
    }
}

/// `−(2 r_kᵀ(e_i − e_j) − 2 e_iᵀ e_j + ‖r_k‖²)`, the TransE score expanded under
/// unit-norm entity rows and squared Euclidean distance.
///
/// It differs from the direct score by the constant `‖e_i‖² + ‖e_j‖² = 2`, so both
/// induce the same ordering over candidates.
pub fn transe_rewritten_score(m: &TranseParams, t: Triple) -> Result<f64> {
    if m.distance != Distance::SquaredEuclidean {
        return Err(Error::Precondition("rewritten TransE score requires squared Euclidean distance".into()));
    }
    if t.subject.index() >= m.entity.rows() || t.object.index() >= m.entity.rows() || t.relation.index() >= m.relation.rows() {
        return Err(Error::DimensionMismatch(format!("triple {t} outside model")));
    }
    let ei = m.entity.row(t.subject.index());
    let ej = m.entity.row(t.object.index());
    for (name, v) in [("subject", ei), ("object", ej)] {
        if (norm_sq(v) - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("{name} embedding is not unit-norm")));
        }
    }
    let r = m.relation.row(t.relation.index());
    let diff: Vec<f64> = ei.iter().zip(ej).map(|(a, b)| a - b).collect();
    Ok(-(2.0 * dot(r, &diff) - 2.0 * dot(ei, ej) + norm_sq(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{LatentModel, ModelConfig, ModelKind};

    fn unit_transe(seed: u64) -> TranseParams {
        let LatentModel::Transe(m) = LatentModel::init(&ModelConfig::new(ModelKind::Transe, 4), 10, 3, seed).unwrap() else {
            unreachable!()
        };
        m
    }

    #[test]
    fn exact_translation_scores_zero() {
        let mut m = TranseParams::zeros(2, 1, 2, Distance::SquaredEuclidean);
        m.entity = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        m.relation = Matrix::from_rows(&[&[-1.0, 1.0]]);
        assert_eq!(m.score_of(Triple::new(0, 0, 1)), 0.0);
        assert!(m.score_of(Triple::new(1, 0, 0)) < 0.0);
    }

    #[test]
    fn se_identity_maps_and_equal_entities_score_zero() {
        let mut m = SeParams::zeros(2, 1, 3, 3);
        m.entity = Matrix::from_rows(&[&[0.3, -0.2, 0.9], &[0.3, -0.2, 0.9]]);
        m.subject_map[0] = Matrix::identity(3);
        m.object_map[0] = Matrix::identity(3);
        assert_eq!(m.score_of(Triple::new(0, 0, 1)), 0.0);
        assert_eq!(m.score_of(Triple::new(0, 0, 0)), 0.0);
    }

    #[test]
    fn rewrite_differs_by_the_unit_norm_constant() {
        let m = unit_transe(3);
        for i in 0..10 {
            for j in 0..10 {
                let t = Triple::new(i, 1, j);
                let rewritten = transe_rewritten_score(&m, t).unwrap();
                assert!((rewritten - m.score_of(t) - 2.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rewrite_preserves_candidate_order() {
        let m = unit_transe(8);
        let order = |f: &dyn Fn(Triple) -> f64| {
            let mut c: Vec<(u32, f64)> = (0..10).map(|j| (j, f(Triple::new(2, 0, j)))).collect();
            c.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            c.into_iter().map(|(j, _)| j).collect::<Vec<_>>()
        };
        assert_eq!(order(&|t| m.score_of(t)), order(&|t| transe_rewritten_score(&m, t).unwrap()));
    }

    #[test]
    fn rewrite_requires_unit_rows_and_squared_distance() {
        let mut m = unit_transe(1);
        m.entity.row_mut(0)[0] += 0.5;
        assert!(matches!(transe_rewritten_score(&m, Triple::new(0, 0, 1)), Err(Error::Precondition(_))));
        let mut l1 = unit_transe(1);
        l1.distance = Distance::L1;
        assert!(transe_rewritten_score(&l1, Triple::new(0, 0, 1)).is_err());
    }

    #[test]
    fn identical_entities_with_zero_translation() {
        // Direct score 0; rewritten 2: the offset ‖e_i‖² + ‖e_j‖² the rewrite drops.
        let mut m = unit_transe(2);
        m.relation.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
        let t = Triple::new(4, 0, 4);
        assert_eq!(m.score_of(t), 0.0);
        assert!((transe_rewritten_score(&m, t).unwrap() - 2.0).abs() < 1e-12);
    }
}
