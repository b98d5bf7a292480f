//! Local and quasi-local similarity indices on a single-relation graph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId};

const KATZ_EPS: f64 = 1e-12;
const KATZ_MAX_TERMS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SimilarityKind {
    CommonNeighbors,
    AdamicAdar,
    PreferentialAttachment,
    /// `Σ_{ℓ≥1} β^ℓ · paths_ℓ(i, j)`, summed until the terms fall below `1e−12`.
    Katz { beta: f64 },
    /// Katz truncated after paths of length `max_len`.
    LocalKatz { beta: f64, max_len: usize },
}

/// A similarity value; `flagged` marks a convention applied on the way (an
/// Adamic–Adar neighbour of degree 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub flagged: bool,
}

/// Simple graph over entity ids with sorted neighbour lists and no self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimilarityGraph {
    adj: Vec<Vec<usize>>,
    directed: bool,
}

impl SimilarityGraph {
    /// Build from `(u, v)` edges over `n` nodes. Undirected graphs store each edge
    /// in both directions. Self-loops and repeats are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, directed: bool) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::EntityOutOfRange(u.max(v)));
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            if !directed {
                adj[v].push(u);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        Ok(Self { adj, directed })
    }

    /// Relation `k` of `kg` with edge directions forgotten.
    pub fn undirected(kg: &KnowledgeGraph, k: RelationId) -> Result<Self> {
        let slice = kg.relation_slice(k)?;
        Self::from_edges(kg.num_entities(), slice.iter().map(|(i, j)| (i.index(), j.index())), false)
    }

    /// Relation `k` of `kg` keeping edge directions (only Katz uses them).
    pub fn directed(kg: &KnowledgeGraph, k: RelationId) -> Result<Self> {
        let slice = kg.relation_slice(k)?;
        Self::from_edges(kg.num_entities(), slice.iter().map(|(i, j)| (i.index(), j.index())), true)
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// `Γ(i)`: neighbours, or out-neighbours when directed.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    fn common(&self, i: usize, j: usize) -> Vec<usize> {
        let (a, b) = (&self.adj[i], &self.adj[j]);
        let (mut x, mut y) = (0, 0);
        let mut out = Vec::new();
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[x]);
                    x += 1;
                    y += 1;
                }
            }
        }
        out
    }

    /// Largest eigenvalue magnitude of the adjacency matrix, by power iteration on
    /// `A + I` (whose Perron root is `ρ(A) + 1`).
    pub fn spectral_radius(&self) -> f64 {
        let n = self.adj.len();
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut rho = 0.0;
        for _ in 0..1000 {
            let mut y = x.clone();
            for (u, nb) in self.adj.iter().enumerate() {
                for &v in nb {
                    // (A + I)x with A[u][v] = 1: row u gathers x[v].
                    y[u] += x[v];
                }
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let next = norm - 1.0;
            x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / norm);
            if (next - rho).abs() < 1e-12 * next.max(1.0) {
                return next.max(0.0);
            }
            rho = next;
        }
        rho.max(0.0)
    }

    /// Walk counts from `i` after one more step: `next[v] = Σ_{u→v} cur[u]`.
    fn advance(&self, cur: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; cur.len()];
        for (u, &c) in cur.iter().enumerate() {
            if c != 0.0 {
                for &v in &self.adj[u] {
                    next[v] += c;
                }
            }
        }
        next
    }

    fn katz(&self, i: usize, j: usize, beta: f64, max_len: Option<usize>) -> Result<f64> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig("Katz requires beta > 0".into()));
        }
        if max_len.is_none() {
            let rho = self.spectral_radius();
            if beta * rho >= 1.0 {
                return Err(Error::Precondition(format!("Katz diverges: beta {beta} >= 1/{rho}")));
            }
        }
        let mut walks = vec![0.0; self.adj.len()];
        walks[i] = 1.0;
        let mut total = 0.0;
        let mut weight = 1.0;
        let limit = max_len.unwrap_or(KATZ_MAX_TERMS);
        for _ in 0..limit {
            walks = self.advance(&walks);
            weight *= beta;
            total += weight * walks[j];
            let largest = walks.iter().fold(0.0f64, |m, &v| m.max(v)) * weight;
            if max_len.is_none() && largest < KATZ_EPS {
                return Ok(total);
            }
            if !largest.is_finite() {
                return Err(Error::Numerical("Katz series overflowed".into()));
            }
        }
        if max_len.is_none() {
            return Err(Error::Numerical("Katz series did not converge".into()));
        }
        Ok(total)
    }
}

/// Similarity of nodes `i` and `j` under `kind`.
pub fn similarity(g: &SimilarityGraph, i: EntityId, j: EntityId, kind: SimilarityKind) -> Result<Similarity> {
    let (i, j) = (i.index(), j.index());
    if i >= g.num_nodes() || j >= g.num_nodes() {
        return Err(Error::EntityOutOfRange(i.max(j)));
    }
    let plain = |value: f64| Ok(Similarity { value, flagged: false });
    match kind {
        SimilarityKind::CommonNeighbors => plain(g.common(i, j).len() as f64),
        SimilarityKind::PreferentialAttachment => plain((g.degree(i) * g.degree(j)) as f64),
        SimilarityKind::AdamicAdar => {
            let mut flagged = false;
            let mut value = 0.0;
            for z in g.common(i, j) {
                let d = g.degree(z);
                if d <= 1 {
                    flagged = true;
                } else {
                    value += 1.0 / (d as f64).ln();
                }
            }
            Ok(Similarity { value, flagged })
        }
        SimilarityKind::Katz { beta } => plain(g.katz(i, j, beta, None)?),
        SimilarityKind::LocalKatz { beta, max_len } => {
            if max_len == 0 {
                return Err(Error::InvalidConfig("local Katz requires max_len >= 1".into()));
            }
            plain(g.katz(i, j, beta, Some(max_len))?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> SimilarityGraph {
        SimilarityGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)], false).unwrap()
    }

    #[test]
    fn triangle_values() {
        let g = triangle();
        let (a, c) = (EntityId(0), EntityId(2));
        assert_eq!(similarity(&g, a, c, SimilarityKind::CommonNeighbors).unwrap().value, 1.0);
        assert_eq!(similarity(&g, a, c, SimilarityKind::PreferentialAttachment).unwrap().value, 4.0);
        let aa = similarity(&g, a, c, SimilarityKind::AdamicAdar).unwrap();
        assert!((aa.value - 1.0 / 2f64.ln()).abs() < 1e-12 && !aa.flagged);
        let lk = similarity(&g, a, c, SimilarityKind::LocalKatz { beta: 0.1, max_len: 2 }).unwrap().value;
        assert!((lk - 0.11).abs() < 1e-15);
    }

    #[test]
    fn triangle_spectral_radius_is_two() {
        assert!((triangle().spectral_radius() - 2.0).abs() < 1e-9);
        assert!(similarity(&triangle(), EntityId(0), EntityId(1), SimilarityKind::Katz { beta: 0.6 }).is_err());
    }

    #[test]
    fn exact_katz_matches_closed_form_on_triangle() {
        // (I − βA)⁻¹ − I for the triangle: off-diagonal β / ((1 + β)(1 − 2β)).
        let beta = 0.2;
        let v = similarity(&triangle(), EntityId(0), EntityId(2), SimilarityKind::Katz { beta }).unwrap().value;
        assert!((v - beta / ((1.0 + beta) * (1.0 - 2.0 * beta))).abs() < 1e-10);
    }

    #[test]
    fn degree_one_common_neighbour_is_flagged() {
        // A node is its own "pair"; its only neighbour has degree 1.
        let g = SimilarityGraph::from_edges(2, [(0, 1)], false).unwrap();
        let aa = similarity(&g, EntityId(0), EntityId(0), SimilarityKind::AdamicAdar).unwrap();
        assert_eq!(aa.value, 0.0);
        assert!(aa.flagged);
    }
}
