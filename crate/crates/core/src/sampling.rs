//! Negative example generation.
//!
//! Three regimes are supported: the closed world assumption (any admissible
//! unobserved triple is false), perturbation of observed triples (replace the
//! subject or the object), and the local closed world assumption (a
//! subject/relation pair with at least one observed object is complete).
//! No regime ever emits an observed triple.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::graph::{EntityId, KnowledgeGraph, RelationId, Slot, Triple, TypeConstraints};
use crate::seed::{self, Rng};

/// Draws per item before falling back to exhaustive enumeration.
pub const MAX_REJECTIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Observed,
    Cwa,
    PerturbedSubject,
    PerturbedObject,
    Lcwa,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::Cwa => "cwa",
            Provenance::PerturbedSubject => "perturbed-subject",
            Provenance::PerturbedObject => "perturbed-object",
            Provenance::Lcwa => "lcwa",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub provenance: Provenance,
}

impl LabeledTriple {
    pub fn positive(triple: Triple) -> Self {
        Self { triple, provenance: Provenance::Observed }
    }

    pub fn negative(triple: Triple, provenance: Provenance) -> Self {
        debug_assert_ne!(provenance, Provenance::Observed);
        Self { triple, provenance }
    }

    pub fn label(&self) -> u8 {
        u8::from(self.provenance == Provenance::Observed)
    }

    pub fn is_positive(&self) -> bool {
        self.provenance == Provenance::Observed
    }
}

/// Labeled training or evaluation data: `D⁺` and `D⁻` in one sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledTripleSet {
    pub items: Vec<LabeledTriple>,
}

impl LabeledTripleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, item: LabeledTriple) {
        self.items.push(item);
    }

    pub fn positives(&self) -> impl Iterator<Item = Triple> + '_ {
        self.items.iter().filter(|i| i.is_positive()).map(|i| i.triple)
    }

    pub fn negatives(&self) -> impl Iterator<Item = Triple> + '_ {
        self.items.iter().filter(|i| !i.is_positive()).map(|i| i.triple)
    }

    pub fn labels(&self) -> Vec<bool> {
        self.items.iter().map(LabeledTriple::is_positive).collect()
    }

    pub fn triples(&self) -> Vec<Triple> {
        self.items.iter().map(|i| i.triple).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// True when no triple carries both labels.
    pub fn is_consistent(&self) -> bool {
        let pos: HashSet<Triple> = self.positives().collect();
        self.negatives().all(|t| !pos.contains(&t))
    }
}

/// Draw up to `count` distinct entities `e` from `candidates` with `accept(e)`,
/// by rejection sampling and falling back to enumeration when rejections pile up.
fn sample_accepted(
    rng: &mut Rng,
    candidates: &[EntityId],
    count: usize,
    accept: impl Fn(EntityId) -> bool,
) -> Vec<EntityId> {
    let mut out: Vec<EntityId> = Vec::with_capacity(count);
    if candidates.is_empty() || count == 0 {
        return out;
    }
    'items: while out.len() < count {
        for _ in 0..MAX_REJECTIONS {
            let e = candidates[rng.random_range(0..candidates.len())];
            if accept(e) && !out.contains(&e) {
                out.push(e);
                continue 'items;
            }
        }
        // Rejection stalled: enumerate what is left and draw from it.
        let mut rest: Vec<EntityId> = candidates.iter().copied().filter(|e| accept(*e) && !out.contains(e)).collect();
        rest.shuffle(rng);
        rest.truncate(count - out.len());
        out.extend(rest);
        break;
    }
    out
}

/// Corrupt the subject and the object of `t`, up to `per_side` times each.
///
/// Replacement entities are admissible for their slot, differ from the original,
/// and the corrupted triple is not a positive of `kg`. The stream is derived from
/// `(seed, t)`, so results do not depend on call order.
pub fn perturb_negatives(
    kg: &KnowledgeGraph,
    t: Triple,
    per_side: usize,
    constraints: &TypeConstraints,
    seed: u64,
) -> Vec<LabeledTriple> {
    let mut rng = seed::rng(seed::triple_seed(seed, t));
    let mut out = Vec::with_capacity(2 * per_side);
    for (slot, provenance) in [(Slot::Subject, Provenance::PerturbedSubject), (Slot::Object, Provenance::PerturbedObject)] {
        let original = slot.of(&t);
        let picks = sample_accepted(&mut rng, constraints.candidates(t.relation, slot), per_side, |e| {
            e != original && !kg.contains(&slot.replace(t, e))
        });
        out.extend(picks.into_iter().map(|e| LabeledTriple::negative(slot.replace(t, e), provenance)));
    }
    out
}

/// Local closed world negatives for the pair `(i, k)`.
///
/// Empty when `(i, k, ·)` has never been observed; otherwise every admissible
/// object `j'` with `(i, k, j')` unobserved.
pub fn lcwa_negatives(kg: &KnowledgeGraph, i: EntityId, k: RelationId, constraints: &TypeConstraints) -> Vec<Triple> {
    let observed = kg.out_neighbors(i, k, crate::graph::Direction::Forward);
    if observed.is_empty() {
        return Vec::new();
    }
    constraints
        .objects(k)
        .iter()
        .filter(|j| observed.binary_search(j).is_err())
        .map(|&j| Triple { subject: i, relation: k, object: j })
        .collect()
}

/// Uniform sample without replacement of admissible unobserved triples, at most `cap`.
pub fn cwa_negatives(kg: &KnowledgeGraph, constraints: &TypeConstraints, cap: usize, seed: u64) -> Vec<Triple> {
    let mut rng = seed::derive_rng(seed, "cwa-negatives");
    let sizes: Vec<usize> = (0..constraints.num_relations())
        .map(|k| constraints.subjects(RelationId(k as u32)).len() * constraints.objects(RelationId(k as u32)).len())
        .collect();
    let total: usize = sizes.iter().sum();
    if cap == 0 || total == 0 {
        return Vec::new();
    }
    let decode = |mut idx: usize| -> Triple {
        for (k, &size) in sizes.iter().enumerate() {
            if idx < size {
                let r = RelationId(k as u32);
                let objs = constraints.objects(r);
                return Triple { subject: constraints.subjects(r)[idx / objs.len()], relation: r, object: objs[idx % objs.len()] };
            }
            idx -= size;
        }
        unreachable!("index within total")
    };

    let mut seen = HashSet::with_capacity(cap);
    let mut out = Vec::with_capacity(cap);
    'items: while out.len() < cap {
        for _ in 0..MAX_REJECTIONS {
            let t = decode(rng.random_range(0..total));
            if !kg.contains(&t) && seen.insert(t) {
                out.push(t);
                continue 'items;
            }
        }
        let rest: Vec<Triple> = (0..total).map(decode).filter(|t| !kg.contains(t) && !seen.contains(t)).collect();
        let take = (cap - out.len()).min(rest.len());
        for i in index::sample(&mut rng, rest.len(), take) {
            out.push(rest[i]);
        }
        break;
    }
    out
}

/// How training negatives are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NegativeRegime {
    /// Corrupt subject or object of the positive.
    Perturbation,
    /// Replace the object of the positive with another admissible one.
    Lcwa,
    /// Any admissible unobserved triple.
    Cwa,
}

impl std::str::FromStr for NegativeRegime {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "perturbation" | "perturb" => Ok(Self::Perturbation),
            "lcwa" => Ok(Self::Lcwa),
            "cwa" => Ok(Self::Cwa),
            other => Err(crate::Error::InvalidConfig(format!("unknown negative regime `{other}`"))),
        }
    }
}

impl NegativeRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Perturbation => "perturbation",
            Self::Lcwa => "lcwa",
            Self::Cwa => "cwa",
        }
    }
}

/// Draws one negative at a time for a given positive; used by the SGD loop.
pub struct NegativeSampler<'a> {
    kg: &'a KnowledgeGraph,
    constraints: &'a TypeConstraints,
    regime: NegativeRegime,
}

impl<'a> NegativeSampler<'a> {
    /// `kg` is the set of known positives that negatives must avoid.
    pub fn new(kg: &'a KnowledgeGraph, constraints: &'a TypeConstraints, regime: NegativeRegime) -> Self {
        Self { kg, constraints, regime }
    }

    pub fn regime(&self) -> NegativeRegime {
        self.regime
    }

    pub fn sample(&self, rng: &mut Rng, positive: Triple) -> Option<LabeledTriple> {
        match self.regime {
            NegativeRegime::Perturbation => {
                let first = if rng.random_bool(0.5) { Slot::Subject } else { Slot::Object };
                let second = if first == Slot::Subject { Slot::Object } else { Slot::Subject };
                [first, second].into_iter().find_map(|slot| self.corrupt(rng, positive, slot))
            }
            NegativeRegime::Lcwa => self
                .corrupt(rng, positive, Slot::Object)
                .map(|n| LabeledTriple::negative(n.triple, Provenance::Lcwa)),
            NegativeRegime::Cwa => {
                let k = positive.relation;
                let subj = self.constraints.subjects(k);
                let obj = self.constraints.objects(k);
                if subj.is_empty() || obj.is_empty() {
                    return None;
                }
                for _ in 0..MAX_REJECTIONS {
                    let t = Triple { subject: subj[rng.random_range(0..subj.len())], relation: k, object: obj[rng.random_range(0..obj.len())] };
                    if !self.kg.contains(&t) {
                        return Some(LabeledTriple::negative(t, Provenance::Cwa));
                    }
                }
                None
            }
        }
    }

    fn corrupt(&self, rng: &mut Rng, t: Triple, slot: Slot) -> Option<LabeledTriple> {
        let original = slot.of(&t);
        let pick = sample_accepted(rng, self.constraints.candidates(t.relation, slot), 1, |e| {
            e != original && !self.kg.contains(&slot.replace(t, e))
        });
        let provenance = match slot {
            Slot::Subject => Provenance::PerturbedSubject,
            Slot::Object => Provenance::PerturbedObject,
        };
        pick.first().map(|&e| LabeledTriple::negative(slot.replace(t, e), provenance))
    }
}

/// Positives plus `per_side` perturbation negatives on each side of each positive.
pub fn perturbation_set(
    kg: &KnowledgeGraph,
    positives: &[Triple],
    per_side: usize,
    constraints: &TypeConstraints,
    seed: u64,
) -> LabeledTripleSet {
    let mut set = LabeledTripleSet::new();
    for &t in positives {
        set.push(LabeledTriple::positive(t));
        set.items.extend(perturb_negatives(kg, t, per_side, constraints, seed));
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{infer_type_constraints, ingest_triples};
    use crate::synth;

    #[test]
    fn perturbing_nimoy_starred_in_reaches_star_wars() {
        let kg = synth::sample_graph();
        let c = infer_type_constraints(&kg);
        let t = kg.lookup("LeonardNimoy", "starredIn", "StarTrek").unwrap();
        let star_wars = kg.entity("StarWars").unwrap();
        let negs = perturb_negatives(&kg, t, 5, &c, 1);
        assert!(negs.iter().any(|n| n.triple == t.with_object(star_wars) && n.provenance == Provenance::PerturbedObject));
        assert!(negs.iter().all(|n| !kg.contains(&n.triple) && c.admits(&n.triple)));
    }

    #[test]
    fn no_admissible_corruption_yields_nothing() {
        let kg = ingest_triples(vec![("a", "r", "b")]).unwrap();
        let c = infer_type_constraints(&kg);
        assert!(perturb_negatives(&kg, kg.triples()[0], 3, &c, 0).is_empty());
    }

    #[test]
    fn perturbations_differ_in_exactly_one_slot() {
        let kg = synth::translation_grid(6, 5);
        let c = TypeConstraints::unconstrained(kg.num_entities(), kg.num_relations());
        for &t in kg.triples().iter().take(20) {
            for n in perturb_negatives(&kg, t, 2, &c, 5) {
                let s = (n.triple.subject != t.subject) as u8;
                let o = (n.triple.object != t.object) as u8;
                assert_eq!(s + o, 1);
                assert_eq!(n.triple.relation, t.relation);
            }
        }
    }

    #[test]
    fn lcwa_functional_born_in() {
        let kg = ingest_triples(vec![
            ("ann", "bornIn", "Boston"),
            ("bob", "bornIn", "Paris"),
            ("cid", "bornIn", "Rome"),
            ("dan", "bornIn", "Oslo"),
        ])
        .unwrap();
        let c = infer_type_constraints(&kg);
        let born = kg.relation("bornIn").unwrap();
        let ann = kg.entity("ann").unwrap();
        let negs = lcwa_negatives(&kg, ann, born, &c);
        assert_eq!(negs.len(), 3);
        let mut covered: Vec<EntityId> = negs.iter().map(|t| t.object).collect();
        covered.extend(kg.out_neighbors(ann, born, crate::graph::Direction::Forward));
        covered.sort();
        assert_eq!(covered, c.objects(born));
        let boston = kg.entity("Boston").unwrap();
        assert!(lcwa_negatives(&kg, boston, born, &c).is_empty());
    }

    #[test]
    fn cwa_cap_zero_and_exhaustion() {
        let kg = synth::sample_graph();
        let free = TypeConstraints::unconstrained(kg.num_entities(), kg.num_relations());
        assert!(cwa_negatives(&kg, &free, 0, 1).is_empty());
        // Complement of the full space is N_e² N_r − |positives|.
        let n = kg.num_entities().pow(2) * kg.num_relations() - kg.len();
        let all = cwa_negatives(&kg, &free, n + 10, 1);
        assert_eq!(all.len(), n);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), n);
    }

    #[test]
    fn cwa_without_constraints_emits_irrelevant_type_consistent_triples() {
        let kg = synth::sample_graph();
        let free = TypeConstraints::unconstrained(kg.num_entities(), kg.num_relations());
        let starred = kg.relation("starredIn").unwrap();
        let spock = kg.entity("Spock").unwrap();
        let negs = cwa_negatives(&kg, &free, 1000, 9);
        // A character "starring" in a movie is admissible once constraints are dropped.
        assert!(negs.iter().any(|t| t.relation == starred && t.subject == spock));
        assert!(negs.iter().all(|t| !kg.contains(t)));
    }

    #[test]
    fn sampler_never_returns_positives() {
        let kg = synth::random_graph(12, 2, 30, 4);
        let c = infer_type_constraints(&kg);
        for regime in [NegativeRegime::Perturbation, NegativeRegime::Lcwa, NegativeRegime::Cwa] {
            let sampler = NegativeSampler::new(&kg, &c, regime);
            let mut rng = seed::rng(3);
            for &t in kg.triples() {
                if let Some(n) = sampler.sample(&mut rng, t) {
                    assert!(!kg.contains(&n.triple));
                    assert!(c.admits(&n.triple));
                }
            }
        }
    }
}
