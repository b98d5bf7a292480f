//! Small named fixtures and synthetic graphs with planted structure.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::graph::{ingest_triples, KnowledgeGraph, Triple, Vocab};
use crate::linalg::Matrix;
use crate::seed;

/// The five facts about Leonard Nimoy, Spock and Star Trek.
pub fn nimoy_facts() -> KnowledgeGraph {
    ingest_triples([
        ("LeonardNimoy", "profession", "Actor"),
        ("LeonardNimoy", "starredIn", "StarTrek"),
        ("LeonardNimoy", "played", "Spock"),
        ("Spock", "characterIn", "StarTrek"),
        ("StarTrek", "genre", "ScienceFiction"),
    ])
    .expect("static fixture")
}

/// Two actors, their characters and movies, sharing a genre.
pub fn sample_graph() -> KnowledgeGraph {
    ingest_triples([
        ("LeonardNimoy", "starredIn", "StarTrek"),
        ("LeonardNimoy", "played", "Spock"),
        ("Spock", "characterIn", "StarTrek"),
        ("StarTrek", "genre", "ScienceFiction"),
        ("AlecGuinness", "starredIn", "StarWars"),
        ("AlecGuinness", "played", "ObiWanKenobi"),
        ("ObiWanKenobi", "characterIn", "StarWars"),
        ("StarWars", "genre", "ScienceFiction"),
    ])
    .expect("static fixture")
}

/// Random multigraph over ids `0..n_entities` and `0..n_relations`.
pub fn random_graph(n_entities: usize, n_relations: usize, n_triples: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = seed::derive_rng(seed, "random-graph");
    let entities = Vocab::from_names((0..n_entities).map(|i| format!("e{i}"))).expect("unique");
    let relations = Vocab::from_names((0..n_relations).map(|k| format!("r{k}"))).expect("unique");
    let triples = (0..n_triples)
        .map(|_| {
            Triple::new(
                rng.random_range(0..n_entities) as u32,
                rng.random_range(0..n_relations) as u32,
                rng.random_range(0..n_entities) as u32,
            )
        })
        .collect();
    KnowledgeGraph::from_parts(entities, relations, triples).expect("ids in range")
}

/// Lattice points `(x, y)` linked by the translations `right = (1,0)`,
/// `up = (0,1)` and `upright = (1,1)`.
pub fn translation_grid(width: usize, height: usize) -> KnowledgeGraph {
    let name = |x: usize, y: usize| format!("p{x}_{y}");
    let mut lines = Vec::new();
    for y in 0..height {
        for x in 0..width {
            for (rel, dx, dy) in [("right", 1, 0), ("up", 0, 1), ("upright", 1, 1)] {
                if x + dx < width && y + dy < height {
                    lines.push((name(x, y), rel.to_string(), name(x + dx, y + dy)));
                }
            }
        }
    }
    ingest_triples(lines).expect("generated names are non-empty")
}

/// Ground truth of a planted bilinear model.
#[derive(Clone, Debug)]
pub struct PlantedBilinear {
    pub entity: Matrix,
    pub relation: Vec<Matrix>,
    pub threshold: f64,
}

/// `y_ijk = [e_iᵀ W_k e_j > threshold]` for Gaussian `E` and `W_k`.
///
/// Dictionaries cover every entity and relation even when some never occur.
pub fn planted_bilinear(n_entities: usize, n_relations: usize, rank: usize, threshold: f64, seed: u64) -> (KnowledgeGraph, PlantedBilinear) {
    let mut rng = seed::derive_rng(seed, "planted-bilinear");
    let mut normal = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    };
    let entity = Matrix::from_fn(n_entities, rank, |_, _| normal(1.0));
    let relation: Vec<Matrix> = (0..n_relations).map(|_| Matrix::from_fn(rank, rank, |_, _| normal(1.0 / rank as f64))).collect();
    let mut triples = Vec::new();
    for (k, w) in relation.iter().enumerate() {
        let ew = entity.matmul(w);
        for i in 0..n_entities {
            for j in 0..n_entities {
                if crate::linalg::dot(ew.row(i), entity.row(j)) > threshold {
                    triples.push(Triple::new(i as u32, k as u32, j as u32));
                }
            }
        }
    }
    let kg = KnowledgeGraph::from_parts(
        Vocab::from_names((0..n_entities).map(|i| format!("e{i}"))).expect("unique"),
        Vocab::from_names((0..n_relations).map(|k| format!("r{k}"))).expect("unique"),
        triples,
    )
    .expect("ids in range");
    (kg, PlantedBilinear { entity, relation, threshold })
}

/// Block tensor of exact rank `rank`: entities fall into `rank` groups and
/// `y_ijk = P_k[group(i), group(j)]` for random 0/1 patterns `P_k` of the given
/// density. Returns the graph and each entity's group.
pub fn planted_blocks(n_entities: usize, n_relations: usize, rank: usize, density: f64, seed: u64) -> (KnowledgeGraph, Vec<usize>) {
    let mut rng = seed::derive_rng(seed, "planted-blocks");
    let mut group: Vec<usize> = (0..n_entities).map(|i| i % rank).collect();
    group.shuffle(&mut rng);
    let mut triples = Vec::new();
    for k in 0..n_relations {
        let pattern: Vec<bool> = (0..rank * rank).map(|_| rng.random_bool(density)).collect();
        for i in 0..n_entities {
            for j in 0..n_entities {
                if pattern[group[i] * rank + group[j]] {
                    triples.push(Triple::new(i as u32, k as u32, j as u32));
                }
            }
        }
    }
    let kg = KnowledgeGraph::from_parts(
        Vocab::from_names((0..n_entities).map(|i| format!("e{i}"))).expect("unique"),
        Vocab::from_names((0..n_relations).map(|k| format!("r{k}"))).expect("unique"),
        triples,
    )
    .expect("ids in range");
    (kg, group)
}

/// People work for companies located in cities; `livesIn` holds exactly when the
/// `worksFor → locatedIn` path exists. `likes` (person → city) and `knows`
/// (person → person) are random distractors.
pub fn planted_rule_graph(n_people: usize, n_companies: usize, n_cities: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = seed::derive_rng(seed, "planted-rule");
    let mut lines = Vec::new();
    let company_city: Vec<usize> = (0..n_companies).map(|c| c % n_cities).collect();
    for p in 0..n_people {
        let c = rng.random_range(0..n_companies);
        lines.push((format!("person{p}"), "worksFor".to_string(), format!("company{c}")));
        lines.push((format!("person{p}"), "livesIn".to_string(), format!("city{}", company_city[c])));
        lines.push((format!("person{p}"), "likes".to_string(), format!("city{}", rng.random_range(0..n_cities))));
        lines.push((format!("person{p}"), "knows".to_string(), format!("person{}", rng.random_range(0..n_people))));
    }
    for (c, &city) in company_city.iter().enumerate() {
        lines.push((format!("company{c}"), "locatedIn".to_string(), format!("city{city}")));
    }
    ingest_triples(lines).expect("generated names are non-empty")
}

/// Entities in `blocks` groups. `memberOf`-style block structure: an entity of group
/// `b` links via `linkedTo` to most entities of group `(b + 1) % blocks`. `marriedTo`
/// is a random perfect matching stored in both directions (symmetric, one strongly
/// connected component per couple).
pub fn mixed_symmetric_block(n_entities: usize, blocks: usize, density: f64, seed: u64) -> KnowledgeGraph {
    let mut rng = seed::derive_rng(seed, "mixed-symmetric-block");
    let block_of = |i: usize| i % blocks;
    let (linked, married) = (0u32, 1u32);
    let mut triples = Vec::new();
    for i in 0..n_entities {
        for j in 0..n_entities {
            if block_of(j) == (block_of(i) + 1) % blocks && rng.random_bool(density) {
                triples.push(Triple::new(i as u32, linked, j as u32));
            }
        }
    }
    let mut order: Vec<u32> = (0..n_entities as u32).collect();
    order.shuffle(&mut rng);
    for pair in order.chunks_exact(2) {
        triples.push(Triple::new(pair[0], married, pair[1]));
        triples.push(Triple::new(pair[1], married, pair[0]));
    }
    KnowledgeGraph::from_parts(
        Vocab::from_names((0..n_entities).map(|i| format!("n{i}"))).expect("unique"),
        Vocab::from_names(["linkedTo".to_string(), "marriedTo".to_string()]).expect("unique"),
        triples,
    )
    .expect("ids in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_expected_edge_counts() {
        let kg = translation_grid(5, 4);
        assert_eq!(kg.num_entities(), 20);
        assert_eq!(kg.len(), 4 * 4 + 5 * 3 + 4 * 3);
    }

    #[test]
    fn planted_rule_holds_exactly() {
        let kg = planted_rule_graph(40, 6, 4, 1);
        let works = kg.relation("worksFor").unwrap();
        let located = kg.relation("locatedIn").unwrap();
        let lives = kg.relation("livesIn").unwrap();
        use crate::graph::Direction::Forward;
        for t in kg.triples().iter().filter(|t| t.relation == lives) {
            let c = kg.out_neighbors(t.subject, works, Forward)[0];
            assert_eq!(kg.out_neighbors(c, located, Forward), &[t.object]);
        }
    }

    #[test]
    fn planted_blocks_follow_groups() {
        let (kg, group) = planted_blocks(12, 2, 3, 0.5, 4);
        for t in kg.triples() {
            for (i, j) in (0..12).flat_map(|i| (0..12).map(move |j| (i, j))) {
                if group[i] == group[t.subject.index()] && group[j] == group[t.object.index()] {
                    assert!(kg.contains(&Triple::new(i as u32, t.relation.0, j as u32)));
                }
            }
        }
    }

    #[test]
    fn married_is_symmetric() {
        let kg = mixed_symmetric_block(20, 4, 0.8, 3);
        let m = kg.relation("marriedTo").unwrap();
        let s = kg.relation_slice(m).unwrap();
        assert_eq!(&s.transpose(), s);
        assert_eq!(s.nnz(), 20);
    }
}
