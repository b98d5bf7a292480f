//! Immutable in-memory knowledge graph.
//!
//! Entities and relations are interned into dense ids in order of first appearance.
//! The positive triples are stored once as a set and once as one sparse boolean slice
//! per relation, with both row (subject → objects) and column (object → subjects)
//! adjacency so walks can follow edges in either direction.

use std::collections::HashMap;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(subject: u32, relation: u32, object: u32) -> Self {
        Self {
            subject: EntityId(subject),
            relation: RelationId(relation),
            object: EntityId(object),
        }
    }

    pub fn with_subject(self, subject: EntityId) -> Self {
        Self { subject, ..self }
    }

    pub fn with_object(self, object: EntityId) -> Self {
        Self { object, ..self }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject.0, self.relation.0, self.object.0)
    }
}

/// Direction in which an edge is traversed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

/// Bijective string ↔ dense id dictionary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Result<Self> {
        let mut v = Self::new();
        for n in names {
            if v.index.contains_key(&n) {
                return Err(Error::Format(format!("duplicate dictionary entry `{n}`")));
            }
            v.intern(&n);
        }
        Ok(v)
    }

    /// Id of `name`, assigning the next id on first sight.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Compressed adjacency: `targets[offsets[i]..offsets[i+1]]` are the sorted neighbours of `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<EntityId>,
}

impl Adjacency {
    fn build(n: usize, mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        let mut offsets = vec![0usize; n + 1];
        for &(a, _) in &pairs {
            offsets[a as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs.into_iter().map(|(_, b)| EntityId(b)).collect();
        Self { offsets, targets }
    }

    #[inline]
    fn neighbors(&self, i: usize) -> &[EntityId] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Sparse boolean `N_e × N_e` slice of the adjacency tensor for one relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSlice {
    n: usize,
    rows: Adjacency,
    cols: Adjacency,
}

impl RelationSlice {
    fn build(n: usize, pairs: Vec<(u32, u32)>) -> Self {
        let flipped = pairs.iter().map(|&(a, b)| (b, a)).collect();
        Self { n, rows: Adjacency::build(n, pairs), cols: Adjacency::build(n, flipped) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rows.targets.len()
    }

    pub fn contains(&self, i: EntityId, j: EntityId) -> bool {
        i.index() < self.n && self.rows.neighbors(i.index()).binary_search(&j).is_ok()
    }

    /// Objects `j` with `(i, j)` set.
    pub fn row(&self, i: EntityId) -> &[EntityId] {
        self.rows.neighbors(i.index())
    }

    /// Subjects `i` with `(i, j)` set.
    pub fn col(&self, j: EntityId) -> &[EntityId] {
        self.cols.neighbors(j.index())
    }

    /// All nonzero coordinates in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        (0..self.n).flat_map(move |i| self.rows.neighbors(i).iter().map(move |&j| (EntityId(i as u32), j)))
    }

    pub fn transpose(&self) -> RelationSlice {
        Self { n: self.n, rows: self.cols.clone(), cols: self.rows.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Arc<Vocab>,
    relations: Arc<Vocab>,
    triples: Vec<Triple>,
    set: HashSet<Triple>,
    slices: Vec<RelationSlice>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.set == other.set
    }
}

impl KnowledgeGraph {
    /// Build from dictionaries and triples. Duplicates are dropped, keeping first order.
    pub fn from_parts(entities: Vocab, relations: Vocab, triples: Vec<Triple>) -> Result<Self> {
        Self::with_shared(Arc::new(entities), Arc::new(relations), triples)
    }

    fn with_shared(entities: Arc<Vocab>, relations: Arc<Vocab>, triples: Vec<Triple>) -> Result<Self> {
        let (ne, nr) = (entities.len(), relations.len());
        let mut set = HashSet::with_capacity(triples.len());
        let mut kept = Vec::with_capacity(triples.len());
        let mut per_rel: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nr];
        for t in triples {
            if t.subject.index() >= ne {
                return Err(Error::EntityOutOfRange(t.subject.index()));
            }
            if t.object.index() >= ne {
                return Err(Error::EntityOutOfRange(t.object.index()));
            }
            if t.relation.index() >= nr {
                return Err(Error::RelationOutOfRange(t.relation.index()));
            }
            if set.insert(t) {
                kept.push(t);
                per_rel[t.relation.index()].push((t.subject.0, t.object.0));
            }
        }
        let slices = per_rel.into_iter().map(|p| RelationSlice::build(ne, p)).collect();
        Ok(Self { entities, relations, triples: kept, set, slices })
    }

    /// A graph over the same dictionaries holding only `triples`.
    pub fn restrict(&self, triples: &[Triple]) -> Result<Self> {
        Self::with_shared(self.entities.clone(), self.relations.clone(), triples.to_vec())
    }

    pub fn empty() -> Self {
        Self::from_parts(Vocab::new(), Vocab::new(), Vec::new()).expect("empty graph")
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    /// Positive triples in first-appearance order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.set.contains(t)
    }

    pub fn entity(&self, name: &str) -> Result<EntityId> {
        self.entities.get(name).map(EntityId).ok_or_else(|| Error::UnknownEntity(name.to_owned()))
    }

    pub fn relation(&self, name: &str) -> Result<RelationId> {
        self.relations.get(name).map(RelationId).ok_or_else(|| Error::UnknownRelation(name.to_owned()))
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        self.entities.name(e.0)
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        self.relations.name(r.0)
    }

    /// Resolve a triple of names against the dictionaries.
    pub fn lookup(&self, s: &str, p: &str, o: &str) -> Result<Triple> {
        Ok(Triple { subject: self.entity(s)?, relation: self.relation(p)?, object: self.entity(o)? })
    }

    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        if t.subject.index() >= self.num_entities() {
            return Err(Error::EntityOutOfRange(t.subject.index()));
        }
        if t.object.index() >= self.num_entities() {
            return Err(Error::EntityOutOfRange(t.object.index()));
        }
        if t.relation.index() >= self.num_relations() {
            return Err(Error::RelationOutOfRange(t.relation.index()));
        }
        Ok(())
    }

    /// The sparse slice `Y_k`.
    pub fn relation_slice(&self, k: RelationId) -> Result<&RelationSlice> {
        self.slices.get(k.index()).ok_or(Error::RelationOutOfRange(k.index()))
    }

    pub fn slices(&self) -> &[RelationSlice] {
        &self.slices
    }

    /// Forward: `{j : (i,k,j)}`; inverse: `{j : (j,k,i)}`. Sorted by id.
    pub fn out_neighbors(&self, i: EntityId, k: RelationId, direction: Direction) -> &[EntityId] {
        let slice = &self.slices[k.index()];
        match direction {
            Direction::Forward => slice.row(i),
            Direction::Inverse => slice.col(i),
        }
    }

    pub fn nnz(&self) -> usize {
        self.slices.iter().map(RelationSlice::nnz).sum()
    }
}

/// Build a graph from `(subject, predicate, object)` string triples.
///
/// Ids are assigned in order of first appearance; repeated triples collapse to one.
/// Line numbers in errors are 1-based positions in `lines`.
pub fn ingest_triples<I, S>(lines: I) -> Result<KnowledgeGraph>
where
    I: IntoIterator<Item = (S, S, S)>,
    S: AsRef<str>,
{
    let mut entities = Vocab::new();
    let mut relations = Vocab::new();
    let mut triples = Vec::new();
    for (n, (s, p, o)) in lines.into_iter().enumerate() {
        let (s, p, o) = (s.as_ref(), p.as_ref(), o.as_ref());
        for (field, value) in [("subject", s), ("predicate", p), ("object", o)] {
            if value.is_empty() {
                return Err(Error::Parse { line: n + 1, message: format!("empty {field}") });
            }
        }
        let subject = EntityId(entities.intern(s));
        let relation = RelationId(relations.intern(p));
        let object = EntityId(entities.intern(o));
        triples.push(Triple { subject, relation, object });
    }
    KnowledgeGraph::from_parts(entities, relations, triples)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Self {
        Self { train, valid, test }
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidSplit(format!("ratios must be positive, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("ratios must sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

/// Partition the positives into train/valid/test.
///
/// Valid and test receive `floor(n · ratio)` triples each, train the remainder. The
/// assignment follows a seeded permutation; each part keeps the graph's triple order.
pub fn holdout_split(kg: &KnowledgeGraph, ratios: SplitRatios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let n = kg.len();
    let n_valid = (n as f64 * ratios.valid + 1e-9).floor() as usize;
    let n_test = (n as f64 * ratios.test + 1e-9).floor() as usize;
    let n_train = n - n_valid - n_test;
    if n >= 3 && (n_valid == 0 || n_test == 0 || n_train == 0) {
        return Err(Error::InvalidSplit(format!(
            "ratios {:?} leave a partition empty for {n} triples ({n_train}/{n_valid}/{n_test})",
            (ratios.train, ratios.valid, ratios.test)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::derive_rng(seed, "holdout-split"));
    let mut part = vec![0u8; n];
    for &idx in &order[..n_valid] {
        part[idx] = 1;
    }
    for &idx in &order[n_valid..n_valid + n_test] {
        part[idx] = 2;
    }
    let mut split = Split { train: Vec::with_capacity(n_train), valid: Vec::new(), test: Vec::new() };
    for (t, p) in kg.triples().iter().zip(part) {
        match p {
            0 => split.train.push(*t),
            1 => split.valid.push(*t),
            _ => split.test.push(*t),
        }
    }
    Ok(split)
}

/// Per-relation admissible subject and object sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeConstraints {
    subjects: Vec<Vec<EntityId>>,
    objects: Vec<Vec<EntityId>>,
}

impl TypeConstraints {
    /// Every entity admissible in every slot.
    pub fn unconstrained(num_entities: usize, num_relations: usize) -> Self {
        let all: Vec<EntityId> = (0..num_entities as u32).map(EntityId).collect();
        Self { subjects: vec![all.clone(); num_relations], objects: vec![all; num_relations] }
    }

    pub fn from_sets(mut subjects: Vec<Vec<EntityId>>, mut objects: Vec<Vec<EntityId>>) -> Result<Self> {
        if subjects.len() != objects.len() {
            return Err(Error::DimensionMismatch("subject/object constraint counts differ".into()));
        }
        for s in subjects.iter_mut().chain(objects.iter_mut()) {
            s.sort_unstable();
            s.dedup();
        }
        Ok(Self { subjects, objects })
    }

    pub fn num_relations(&self) -> usize {
        self.subjects.len()
    }

    pub fn subjects(&self, k: RelationId) -> &[EntityId] {
        &self.subjects[k.index()]
    }

    pub fn objects(&self, k: RelationId) -> &[EntityId] {
        &self.objects[k.index()]
    }

    pub fn admits_subject(&self, k: RelationId, e: EntityId) -> bool {
        self.subjects[k.index()].binary_search(&e).is_ok()
    }

    pub fn admits_object(&self, k: RelationId, e: EntityId) -> bool {
        self.objects[k.index()].binary_search(&e).is_ok()
    }

    pub fn admits(&self, t: &Triple) -> bool {
        t.relation.index() < self.subjects.len()
            && self.admits_subject(t.relation, t.subject)
            && self.admits_object(t.relation, t.object)
    }

    /// Candidates for one slot of relation `k`.
    pub fn candidates(&self, k: RelationId, slot: Slot) -> &[EntityId] {
        match slot {
            Slot::Subject => self.subjects(k),
            Slot::Object => self.objects(k),
        }
    }
}

/// Subject or object position of a triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Subject,
    Object,
}

impl Slot {
    pub fn of(self, t: &Triple) -> EntityId {
        match self {
            Slot::Subject => t.subject,
            Slot::Object => t.object,
        }
    }

    pub fn replace(self, t: Triple, e: EntityId) -> Triple {
        match self {
            Slot::Subject => t.with_subject(e),
            Slot::Object => t.with_object(e),
        }
    }
}

/// Observed-type constraints: the subjects and objects each relation has been seen with.
pub fn infer_type_constraints(kg: &KnowledgeGraph) -> TypeConstraints {
    let nr = kg.num_relations();
    let mut subjects = vec![Vec::new(); nr];
    let mut objects = vec![Vec::new(); nr];
    for t in kg.triples() {
        subjects[t.relation.index()].push(t.subject);
        objects[t.relation.index()].push(t.object);
    }
    TypeConstraints::from_sets(subjects, objects).expect("matched lengths")
}
