//! Entities, relations, triples and the train/valid/test splits they live in.
//!
//! Symbols are interned into dense indices in first-appearance order, so
//! appending rows to a dataset never reindexes existing entities.

mod io;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, save_dataset, DatasetFormat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A single fact `(head, relation, tail)`. Self-loops are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple { head, relation, tail }
    }

    pub fn entity_at(&self, position: Position) -> EntityId {
        match position {
            Position::Head => self.head,
            Position::Tail => self.tail,
        }
    }

    pub fn with_entity(&self, position: Position, entity: EntityId) -> Triple {
        let mut t = *self;
        match position {
            Position::Head => t.head = entity,
            Position::Tail => t.tail = entity,
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: bool,
}

impl LabeledTriple {
    pub fn positive(triple: Triple) -> Self {
        LabeledTriple { triple, label: true }
    }

    pub fn negative(triple: Triple) -> Self {
        LabeledTriple { triple, label: false }
    }
}

/// Which end of a triple an operation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Head,
    Tail,
}

/// Replace the entity at `position` with `replacement`.
pub fn corrupt_triple(t: Triple, position: Position, replacement: EntityId) -> Result<Triple> {
    if t.entity_at(position) == replacement {
        return Err(Error::NoOpCorruption(t));
    }
    Ok(t.with_entity(position, replacement))
}

/// Bijective name <-> dense index table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl FromIterator<String> for SymbolTable {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut table = SymbolTable::new();
        for name in iter {
            table.intern(&name);
        }
        table
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub entities: SymbolTable,
    pub relations: SymbolTable,
}

impl Vocabulary {
    /// Entities `e0..` and relations `r0..`.
    pub fn synthetic(num_entities: usize, num_relations: usize) -> Self {
        Vocabulary {
            entities: (0..num_entities).map(|i| format!("e{i}")).collect(),
            relations: (0..num_relations).map(|i| format!("r{i}")).collect(),
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity(&self, name: &str) -> Result<EntityId> {
        self.entities
            .get(name)
            .map(EntityId)
            .ok_or_else(|| Error::UnknownName { kind: "entity", name: name.to_string() })
    }

    pub fn relation(&self, name: &str) -> Result<RelationId> {
        self.relations
            .get(name)
            .map(RelationId)
            .ok_or_else(|| Error::UnknownName { kind: "relation", name: name.to_string() })
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        self.entities.name(e.0)
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        self.relations.name(r.0)
    }

    /// Parse `"head relation tail"` (whitespace or tab separated).
    pub fn parse_triple(&self, text: &str) -> Result<Triple> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                file: "<triple>".into(),
                line: 1,
                message: format!("expected `head relation tail`, got `{text}`"),
            });
        }
        Ok(Triple::new(self.entity(parts[0])?, self.relation(parts[1])?, self.entity(parts[2])?))
    }

    pub fn display<'a>(&'a self, t: &Triple) -> TripleDisplay<'a> {
        TripleDisplay { vocab: self, triple: *t }
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.num_entities() as u32).map(EntityId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.num_relations() as u32).map(RelationId)
    }
}

pub struct TripleDisplay<'a> {
    vocab: &'a Vocabulary,
    triple: Triple,
}

impl fmt::Display for TripleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.vocab.entity_name(self.triple.head),
            self.vocab.relation_name(self.triple.relation),
            self.vocab.entity_name(self.triple.tail)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Train,
    Valid,
    Test,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Valid => "valid",
            SplitKind::Test => "test",
        }
    }
}

/// Train/valid/test lists over a shared vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplits {
    pub vocab: Arc<Vocabulary>,
    pub train: Vec<LabeledTriple>,
    pub valid: Vec<LabeledTriple>,
    pub test: Vec<LabeledTriple>,
}

impl DatasetSplits {
    pub fn split(&self, kind: SplitKind) -> &[LabeledTriple] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Valid => &self.valid,
            SplitKind::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, kind: SplitKind) -> &mut Vec<LabeledTriple> {
        match kind {
            SplitKind::Train => &mut self.train,
            SplitKind::Valid => &mut self.valid,
            SplitKind::Test => &mut self.test,
        }
    }

    pub fn positives(&self, kind: SplitKind) -> impl Iterator<Item = Triple> + '_ {
        self.split(kind).iter().filter(|lt| lt.label).map(|lt| lt.triple)
    }

    /// Positive triples of every split.
    pub fn all_positives(&self) -> HashSet<Triple> {
        [SplitKind::Train, SplitKind::Valid, SplitKind::Test].into_iter().flat_map(|k| self.positives(k)).collect()
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    /// Check the split invariants: positives disjoint across splits, ids in range.
    pub fn validate(&self) -> Result<()> {
        let ne = self.num_entities();
        let nr = self.num_relations();
        let mut seen: HashSet<Triple> = HashSet::new();
        for kind in [SplitKind::Train, SplitKind::Valid, SplitKind::Test] {
            let mut local = HashSet::new();
            for lt in self.split(kind) {
                let t = lt.triple;
                if t.head.index() >= ne || t.tail.index() >= ne {
                    return Err(Error::OutOfRange { kind: "entity", id: t.head.index().max(t.tail.index()), size: ne });
                }
                if t.relation.index() >= nr {
                    return Err(Error::OutOfRange { kind: "relation", id: t.relation.index(), size: nr });
                }
                if lt.label {
                    if seen.contains(&t) {
                        let d = &self.vocab;
                        return Err(Error::OverlappingSplits(
                            d.entity_name(t.head).into(),
                            d.relation_name(t.relation).into(),
                            d.entity_name(t.tail).into(),
                        ));
                    }
                    local.insert(t);
                }
            }
            seen.extend(local);
        }
        Ok(())
    }
}

/// Facts with per-entity outgoing and incoming adjacency.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    vocab: Arc<Vocabulary>,
    facts: Vec<Triple>,
    fact_set: HashSet<Triple>,
    outgoing: Vec<Vec<(RelationId, EntityId)>>,
    incoming: Vec<Vec<(RelationId, EntityId)>>,
}

impl KnowledgeGraph {
    /// Build from a fact list; duplicates are dropped, first occurrence wins.
    pub fn new(vocab: Arc<Vocabulary>, facts: impl IntoIterator<Item = Triple>) -> Self {
        let n = vocab.num_entities();
        let mut g = KnowledgeGraph {
            vocab,
            facts: Vec::new(),
            fact_set: HashSet::new(),
            outgoing: vec![Vec::new(); n],
            incoming: vec![Vec::new(); n],
        };
        for t in facts {
            g.insert(t);
        }
        g
    }

    /// Graph of the train split's positive facts.
    pub fn from_splits(splits: &DatasetSplits) -> Self {
        Self::new(splits.vocab.clone(), splits.positives(SplitKind::Train))
    }

    fn insert(&mut self, t: Triple) -> bool {
        if !self.fact_set.insert(t) {
            return false;
        }
        self.facts.push(t);
        self.outgoing[t.head.index()].push((t.relation, t.tail));
        self.incoming[t.tail.index()].push((t.relation, t.head));
        true
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn facts(&self) -> &[Triple] {
        &self.facts
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.fact_set.contains(t)
    }

    pub fn outgoing(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.outgoing[e.index()]
    }

    pub fn incoming(&self, e: EntityId) -> &[(RelationId, EntityId)] {
        &self.incoming[e.index()]
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }

    /// A new graph with `removed` facts dropped and `added` facts inserted.
    pub fn with_changes(&self, removed: &HashSet<Triple>, added: &[Triple]) -> Self {
        let kept = self.facts.iter().copied().filter(|t| !removed.contains(t));
        Self::new(self.vocab.clone(), kept.chain(added.iter().copied()))
    }

    /// Facts grouped by relation, in insertion order.
    pub fn facts_by_relation(&self) -> Vec<Vec<Triple>> {
        let mut out = vec![Vec::new(); self.num_relations()];
        for t in &self.facts {
            out[t.relation.index()].push(*t);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(entities: &[&str], relations: &[&str]) -> Arc<Vocabulary> {
        Arc::new(Vocabulary {
            entities: entities.iter().map(|s| s.to_string()).collect(),
            relations: relations.iter().map(|s| s.to_string()).collect(),
        })
    }

    #[test]
    fn corruption_replaces_one_slot() {
        let t = Triple::new(EntityId(0), RelationId(0), EntityId(1));
        let c = corrupt_triple(t, Position::Tail, EntityId(2)).unwrap();
        assert_eq!(c, Triple::new(EntityId(0), RelationId(0), EntityId(2)));
        assert_eq!(t.tail, EntityId(1));
        // reverse substitution restores the original
        assert_eq!(corrupt_triple(c, Position::Tail, EntityId(1)).unwrap(), t);
    }

    #[test]
    fn no_op_corruption_is_rejected() {
        let t = Triple::new(EntityId(0), RelationId(0), EntityId(1));
        assert!(matches!(corrupt_triple(t, Position::Head, EntityId(0)), Err(Error::NoOpCorruption(_))));
    }

    #[test]
    fn sponge_corruption_example() {
        let v = vocab(&["sponge", "scrub", "microwave"], &["ObjUsedTo"]);
        let t = v.parse_triple("sponge ObjUsedTo scrub").unwrap();
        let c = corrupt_triple(t, Position::Tail, v.entity("microwave").unwrap()).unwrap();
        assert_eq!(v.display(&c).to_string(), "(sponge, ObjUsedTo, microwave)");
    }

    #[test]
    fn adjacency_degrees_match_fact_count() {
        let v = vocab(&["a", "b", "c"], &["r", "s"]);
        let facts = [
            Triple::new(EntityId(0), RelationId(0), EntityId(1)),
            Triple::new(EntityId(1), RelationId(1), EntityId(2)),
            Triple::new(EntityId(2), RelationId(0), EntityId(2)),
            Triple::new(EntityId(0), RelationId(0), EntityId(1)),
        ];
        let g = KnowledgeGraph::new(v, facts);
        assert_eq!(g.facts().len(), 3);
        let out: usize = (0..3).map(|e| g.outgoing(EntityId(e)).len()).sum();
        let inc: usize = (0..3).map(|e| g.incoming(EntityId(e)).len()).sum();
        assert_eq!(out, 3);
        assert_eq!(inc, 3);
    }

    #[test]
    fn overlapping_positive_splits_are_rejected() {
        let v = vocab(&["a", "b"], &["r"]);
        let t = Triple::new(EntityId(0), RelationId(0), EntityId(1));
        let s = DatasetSplits {
            vocab: v,
            train: vec![LabeledTriple::positive(t)],
            valid: vec![],
            test: vec![LabeledTriple::positive(t)],
        };
        assert!(matches!(s.validate(), Err(Error::OverlappingSplits(..))));
    }
}
