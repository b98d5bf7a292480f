use std::collections::HashSet;

use proptest::prelude::*;

use kgraph_core::io::{read_binary_kg, read_triple_lines, to_tsv, write_binary_kg};
use kgraph_core::{holdout_split, infer_type_constraints, ingest_triples, SplitRatios, Triple};

fn name() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,6}"
}

fn triple_list() -> impl Strategy<Value = Vec<(String, String, String)>> {
    prop::collection::vec((name(), prop::sample::select(vec!["p", "q", "r"]).prop_map(String::from), name()), 0..40)
}

proptest! {
    #[test]
    fn tsv_round_trip_keeps_dictionaries_and_positives(lines in triple_list()) {
        let kg = ingest_triples(lines.clone()).unwrap();
        let again = ingest_triples(read_triple_lines(to_tsv(&kg).as_bytes()).unwrap()).unwrap();
        prop_assert_eq!(again.entities(), kg.entities());
        prop_assert_eq!(again.relations(), kg.relations());
        prop_assert_eq!(&again, &kg);
    }

    #[test]
    fn binary_round_trip_is_exact(lines in triple_list()) {
        let kg = ingest_triples(lines).unwrap();
        let mut buf = Vec::new();
        write_binary_kg(&kg, &mut buf).unwrap();
        let back = read_binary_kg(buf.as_slice()).unwrap();
        prop_assert_eq!(back.triples(), kg.triples());
        prop_assert_eq!(&back, &kg);
    }

    #[test]
    fn slices_partition_the_positives(lines in triple_list()) {
        let kg = ingest_triples(lines.clone()).unwrap();
        let total: usize = kg.slices().iter().map(|s| s.nnz()).sum();
        prop_assert_eq!(total, kg.len());
        let distinct: HashSet<_> = lines.iter().collect();
        prop_assert_eq!(kg.len(), distinct.len());
        for t in kg.triples() {
            prop_assert!(kg.relation_slice(t.relation).unwrap().contains(t.subject, t.object));
        }
    }

    #[test]
    fn splits_are_deterministic_partitions(lines in triple_list(), seed in any::<u64>()) {
        let kg = ingest_triples(lines).unwrap();
        prop_assume!(kg.len() >= 10);
        let ratios = SplitRatios::new(0.8, 0.1, 0.1);
        let a = holdout_split(&kg, ratios, seed).unwrap();
        prop_assert_eq!(&a, &holdout_split(&kg, ratios, seed).unwrap());
        let mut all: Vec<Triple> = a.train.iter().chain(&a.valid).chain(&a.test).copied().collect();
        prop_assert_eq!(all.len(), kg.len());
        all.sort_by_key(|t| (t.subject.0, t.relation.0, t.object.0));
        all.dedup();
        prop_assert_eq!(all.len(), kg.len());
        prop_assert_eq!(a.valid.len(), kg.len() / 10);
    }

    #[test]
    fn every_positive_is_admissible(lines in triple_list()) {
        let kg = ingest_triples(lines).unwrap();
        let tc = infer_type_constraints(&kg);
        for t in kg.triples() {
            prop_assert!(tc.admits(t));
        }
    }
}
