use proptest::prelude::*;

use kgraph_core::sampling::{cwa_negatives, lcwa_negatives, perturb_negatives, perturbation_set, NegativeRegime, NegativeSampler};
use kgraph_core::{infer_type_constraints, seed, synth, EntityId, KnowledgeGraph, RelationId, TypeConstraints};

fn graph() -> impl Strategy<Value = KnowledgeGraph> {
    (2usize..9, 1usize..4, 1usize..30, any::<u64>()).prop_map(|(ne, nr, n, s)| synth::random_graph(ne, nr, n, s))
}

proptest! {
    #[test]
    fn no_regime_emits_a_positive(kg in graph(), s in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let tc = infer_type_constraints(&kg);
        let pos = kg.triples()[pick.index(kg.len())];
        for n in perturb_negatives(&kg, pos, 3, &tc, s) {
            prop_assert!(!kg.contains(&n.triple));
        }
        for t in cwa_negatives(&kg, &tc, 10, s) {
            prop_assert!(!kg.contains(&t));
        }
        for regime in [NegativeRegime::Perturbation, NegativeRegime::Lcwa, NegativeRegime::Cwa] {
            let sampler = NegativeSampler::new(&kg, &tc, regime);
            let mut rng = seed::rng(s);
            for _ in 0..5 {
                if let Some(n) = sampler.sample(&mut rng, pos) {
                    prop_assert!(!kg.contains(&n.triple));
                }
            }
        }
        prop_assert!(perturbation_set(&kg, kg.triples(), 2, &tc, s).is_consistent());
    }

    #[test]
    fn perturbations_change_exactly_one_slot(kg in graph(), s in any::<u64>()) {
        let tc = TypeConstraints::unconstrained(kg.num_entities(), kg.num_relations());
        for &pos in kg.triples() {
            for n in perturb_negatives(&kg, pos, 2, &tc, s) {
                let t = n.triple;
                prop_assert_eq!(t.relation, pos.relation);
                prop_assert!((t.subject != pos.subject) ^ (t.object != pos.object));
            }
        }
    }

    #[test]
    fn lcwa_abstains_exactly_on_unseen_pairs(kg in graph()) {
        let tc = TypeConstraints::unconstrained(kg.num_entities(), kg.num_relations());
        for i in 0..kg.num_entities() as u32 {
            for k in 0..kg.num_relations() as u32 {
                let seen = kg.triples().iter().filter(|t| t.subject.0 == i && t.relation.0 == k).count();
                let negs = lcwa_negatives(&kg, EntityId(i), RelationId(k), &tc);
                if seen == 0 {
                    prop_assert!(negs.is_empty());
                } else {
                    prop_assert_eq!(negs.len(), kg.num_entities() - seen);
                }
            }
        }
    }

    #[test]
    fn identical_seeds_reproduce_sets(kg in graph(), s in any::<u64>()) {
        let tc = infer_type_constraints(&kg);
        prop_assert_eq!(perturbation_set(&kg, kg.triples(), 2, &tc, s), perturbation_set(&kg, kg.triples(), 2, &tc, s));
        prop_assert_eq!(cwa_negatives(&kg, &tc, 7, s), cwa_negatives(&kg, &tc, 7, s));
    }
}
