use proptest::prelude::*;

use kgraph_core::latent::{ntn_from_rescal, read_model, transe_rewritten_score, write_model};
use kgraph_core::{LatentModel, ModelConfig, ModelKind, Nonlinearity, Triple};

fn kind() -> impl Strategy<Value = ModelKind> {
    prop::sample::select(ModelKind::ALL.to_vec())
}

fn config() -> impl Strategy<Value = ModelConfig> {
    (kind(), 1usize..5, 1usize..4, 1usize..4, 1usize..4, any::<bool>()).prop_map(|(kind, he, ha, hb, hc, tanh)| ModelConfig {
        relation_dim: hc + 1,
        hidden_a: ha,
        hidden_b: hb,
        hidden_c: hc,
        nonlinearity: if tanh { Nonlinearity::Tanh } else { Nonlinearity::Identity },
        ..ModelConfig::new(kind, he)
    })
}

fn setup() -> impl Strategy<Value = (ModelConfig, usize, usize, u64, Triple)> {
    (config(), 3usize..8, 1usize..4, any::<u64>()).prop_flat_map(|(cfg, ne, nr, seed)| {
        (Just(cfg), Just(ne), Just(nr), Just(seed), (0..ne as u32, 0..nr as u32, 0..ne as u32).prop_map(|(s, r, o)| Triple::new(s, r, o)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entity_gradient_touches_only_the_two_arguments((cfg, ne, nr, seed, t) in setup()) {
        let m = LatentModel::init(&cfg, ne, nr, seed).unwrap();
        let g = m.score_gradient(t).unwrap();
        for (block, row) in g.touched() {
            if block == 0 {
                prop_assert!(row == t.subject.index() || row == t.object.index());
            }
        }
    }

    #[test]
    fn other_entities_do_not_affect_a_score((cfg, ne, nr, seed, t) in setup(), delta in -2.0..2.0f64) {
        let m = LatentModel::init(&cfg, ne, nr, seed).unwrap();
        let before = m.score(t).unwrap();
        let mut moved = m.clone();
        for e in 0..ne {
            if e != t.subject.index() && e != t.object.index() {
                moved.blocks_mut()[0].row_mut(e).iter_mut().for_each(|v| *v += delta);
            }
        }
        prop_assert_eq!(moved.score(t).unwrap(), before);
        let mut shifted = m.clone();
        shifted.blocks_mut()[0].row_mut(t.subject.index()).iter_mut().for_each(|v| *v += 0.5);
        for k in 0..nr as u32 {
            let moved_any = (0..ne as u32).any(|j| {
                let u = Triple::new(t.subject.0, k, j);
                shifted.score(u).unwrap() != m.score(u).unwrap()
            });
            prop_assert!(moved_any, "relation {} ignored the shared subject row", k);
        }
    }

    #[test]
    fn rescal_is_bilinear(seed in any::<u64>(), he in 1usize..5, c in -3.0..3.0f64, s in 0u32..5, o in 0u32..5) {
        prop_assume!(s != o);
        let m = LatentModel::init(&ModelConfig::new(ModelKind::Rescal, he), 5, 2, seed).unwrap();
        let t = Triple::new(s, 1, o);
        for side in [s, o] {
            let mut scaled = m.clone();
            scaled.blocks_mut()[0].row_mut(side as usize).iter_mut().for_each(|v| *v *= c);
            let expect = c * m.score(t).unwrap();
            prop_assert!((scaled.score(t).unwrap() - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn ntn_built_from_rescal_scores_identically(seed in any::<u64>(), he in 1usize..5, ne in 1usize..6, nr in 1usize..3) {
        let LatentModel::Rescal(r) = LatentModel::init(&ModelConfig::new(ModelKind::Rescal, he), ne, nr, seed).unwrap() else { unreachable!() };
        let ntn = LatentModel::Ntn(ntn_from_rescal(&r));
        let rescal = LatentModel::Rescal(r);
        for s in 0..ne as u32 {
            for k in 0..nr as u32 {
                for o in 0..ne as u32 {
                    let t = Triple::new(s, k, o);
                    let (a, b) = (rescal.score(t).unwrap(), ntn.score(t).unwrap());
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                }
            }
        }
    }

    #[test]
    fn transe_rewrite_preserves_order(seed in any::<u64>(), he in 1usize..6, s in 0u32..8, k in 0u32..3) {
        let LatentModel::Transe(m) = LatentModel::init(&ModelConfig::new(ModelKind::Transe, he), 8, 3, seed).unwrap() else { unreachable!() };
        let direct = LatentModel::Transe(m.clone());
        let mut offsets = Vec::new();
        for o in 0..8u32 {
            let t = Triple::new(s, k, o);
            offsets.push(transe_rewritten_score(&m, t).unwrap() - direct.score(t).unwrap());
        }
        for off in offsets {
            prop_assert!((off - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn param_count_matches_materialised_blocks(cfg in config(), ne in 1usize..8, nr in 1usize..4) {
        let m = LatentModel::zeros(&cfg, ne, nr);
        let stored: usize = m.blocks().iter().map(|(_, b)| b.len()).sum();
        prop_assert_eq!(cfg.param_count(ne, nr), stored);
        prop_assert_eq!(m.param_total(), stored);
    }

    #[test]
    fn store_round_trip_is_lossless(cfg in config(), ne in 1usize..6, nr in 1usize..3, seed in any::<u64>()) {
        let m = LatentModel::init(&cfg, ne, nr, seed).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m, seed).unwrap();
        let (header, back) = read_model(buf.as_slice()).unwrap();
        prop_assert_eq!(back, m);
        prop_assert_eq!(header.seed, seed);
    }
}
