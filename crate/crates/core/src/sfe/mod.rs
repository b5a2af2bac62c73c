//! Relation-path features over the embedding-augmented graph.

mod paths;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple, Vocabulary};
use crate::kge::EmbeddingModel;

pub use paths::{
    build_feature_matrix, extract_paths, extract_paths_split, write_feature_dump, PathExtractor, PathFeatureMatrix,
};

pub const DEFAULT_MAX_PATH_LENGTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Inverse => "inv",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedRelationStep {
    pub relation: RelationId,
    pub direction: Direction,
}

impl DirectedRelationStep {
    pub fn forward(relation: RelationId) -> Self {
        DirectedRelationStep { relation, direction: Direction::Forward }
    }

    pub fn inverse(relation: RelationId) -> Self {
        DirectedRelationStep { relation, direction: Direction::Inverse }
    }

    /// The fact realizing this step when walking from `from` to `to`.
    pub fn fact(&self, from: EntityId, to: EntityId) -> Triple {
        match self.direction {
            Direction::Forward => Triple::new(from, self.relation, to),
            Direction::Inverse => Triple::new(to, self.relation, from),
        }
    }
}

/// A sequence of directed relations; equality is sequence equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationPath {
    pub steps: Vec<DirectedRelationStep>,
}

impl RelationPath {
    pub fn new(steps: Vec<DirectedRelationStep>) -> Self {
        assert!(!steps.is_empty(), "relation paths are non-empty");
        RelationPath { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The same path walked from the other end.
    pub fn reversed(&self) -> Self {
        RelationPath {
            steps: self
                .steps
                .iter()
                .rev()
                .map(|s| DirectedRelationStep { relation: s.relation, direction: s.direction.flip() })
                .collect(),
        }
    }

    /// `r1.fwd/r2.inv` form.
    pub fn label<'a>(&'a self, vocab: &'a Vocabulary) -> PathLabel<'a> {
        PathLabel { path: self, vocab }
    }
}

pub struct PathLabel<'a> {
    path: &'a RelationPath,
    vocab: &'a Vocabulary,
}

impl fmt::Display for PathLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.path.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{}.{}", self.vocab.relation_name(s.relation), s.direction.suffix())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    NeighborSubstituted,
}

/// Which entity of a fact is swapped for its nearest neighbors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstitutionMode {
    #[default]
    Both,
    HeadOnly,
    TailOnly,
}

/// G′: the facts of G that the model believes, plus believed facts obtained
/// by swapping a head or tail for one of its `k` nearest neighbors.
#[derive(Clone, Debug)]
pub struct AugmentedGraph {
    graph: KnowledgeGraph,
    retained: usize,
    k_substitution: usize,
}

impl AugmentedGraph {
    /// Every fact of `g` kept as is, nothing added.
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        AugmentedGraph { graph: g.clone(), retained: g.facts().len(), k_substitution: 0 }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        self.graph.vocab()
    }

    pub fn k_substitution(&self) -> usize {
        self.k_substitution
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.graph.contains(t)
    }

    /// Facts of the base graph that survived classification.
    pub fn original_facts(&self) -> &[Triple] {
        &self.graph.facts()[..self.retained]
    }

    /// Neighbor-substituted facts, disjoint from the base graph.
    pub fn added_facts(&self) -> &[Triple] {
        &self.graph.facts()[self.retained..]
    }

    pub fn provenance(&self, t: &Triple) -> Option<Provenance> {
        let i = self.graph.facts().iter().position(|f| f == t)?;
        Some(if i < self.retained { Provenance::Original } else { Provenance::NeighborSubstituted })
    }
}

/// Build G′ from `g` and the model's beliefs.
pub fn build_augmented_graph(
    g: &KnowledgeGraph,
    m: &EmbeddingModel,
    k: usize,
    mode: SubstitutionMode,
) -> AugmentedGraph {
    let n = g.num_entities();
    let k = k.min(n.saturating_sub(1));
    let neighbors: Vec<Vec<EntityId>> = if k == 0 {
        vec![Vec::new(); n]
    } else {
        (0..n as u32)
            .into_par_iter()
            .map(|e| m.nearest_neighbors(EntityId(e), k).expect("entity in range and k < |E|"))
            .collect()
    };
    let retained: Vec<Triple> = g.facts().iter().copied().filter(|t| m.is_true(t)).collect();
    let candidates: Vec<Vec<Triple>> = g
        .facts()
        .par_iter()
        .map(|t| {
            let mut out = Vec::new();
            if mode != SubstitutionMode::TailOnly {
                out.extend(neighbors[t.head.index()].iter().map(|&h| Triple { head: h, ..*t }));
            }
            if mode != SubstitutionMode::HeadOnly {
                out.extend(neighbors[t.tail.index()].iter().map(|&e| Triple { tail: e, ..*t }));
            }
            out.retain(|c| !g.contains(c) && m.is_true(c));
            out
        })
        .collect();
    let mut seen: HashSet<Triple> = HashSet::new();
    let added: Vec<Triple> = candidates.into_iter().flatten().filter(|t| seen.insert(*t)).collect();
    let n_retained = retained.len();
    AugmentedGraph {
        graph: KnowledgeGraph::new(g.vocab().clone(), retained.into_iter().chain(added)),
        retained: n_retained,
        k_substitution: k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Vocabulary;

    fn vocab(ne: usize, nr: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::synthetic(ne, nr))
    }

    fn t(h: u32, r: u32, tl: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(r), EntityId(tl))
    }

    /// Lookup-table model that believes exactly `believed`.
    fn model_believing(ne: usize, believed: &[Triple]) -> EmbeddingModel {
        let set: HashSet<Triple> = believed.iter().copied().collect();
        let mut m = EmbeddingModel::from_score_table(ne, 1, |x| if set.contains(&x) { 1.0 } else { -1.0 });
        m.set_threshold(RelationId(0), 0.0);
        m
    }

    #[test]
    fn k_zero_keeps_only_believed_facts() {
        let g = KnowledgeGraph::new(vocab(3, 1), [t(0, 0, 1), t(1, 0, 2)]);
        let m = model_believing(3, &[t(0, 0, 1), t(2, 0, 2)]);
        let a = build_augmented_graph(&g, &m, 0, SubstitutionMode::Both);
        assert_eq!(a.original_facts(), &[t(0, 0, 1)]);
        assert!(a.added_facts().is_empty());
        assert!(!a.contains(&t(1, 0, 2)));
    }

    #[test]
    fn substitutions_match_brute_force() {
        let ne = 4;
        let g = KnowledgeGraph::new(vocab(ne, 1), [t(0, 0, 2)]);
        for believed in [
            vec![t(0, 0, 2)],
            vec![t(0, 0, 2), t(1, 0, 2)],
            vec![t(0, 0, 2), t(0, 0, 3), t(1, 0, 2), t(3, 0, 3)],
            vec![t(0, 0, 1), t(0, 0, 3), t(3, 0, 2)],
        ] {
            let m = model_believing(ne, &believed);
            for mode in [SubstitutionMode::Both, SubstitutionMode::HeadOnly, SubstitutionMode::TailOnly] {
                let a = build_augmented_graph(&g, &m, 1, mode);
                let mut expected = Vec::new();
                let nh = m.nearest_neighbors(EntityId(0), 1).unwrap()[0];
                let nt = m.nearest_neighbors(EntityId(2), 1).unwrap()[0];
                if mode != SubstitutionMode::TailOnly && m.is_true(&t(nh.0, 0, 2)) {
                    expected.push(t(nh.0, 0, 2));
                }
                if mode != SubstitutionMode::HeadOnly && m.is_true(&t(0, 0, nt.0)) {
                    expected.push(t(0, 0, nt.0));
                }
                assert_eq!(a.added_facts(), expected.as_slice());
                assert!(a.added_facts().len() <= 2);
                for f in a.added_facts() {
                    assert!(m.is_true(f));
                    assert!(!g.contains(f));
                    assert_eq!(a.provenance(f), Some(Provenance::NeighborSubstituted));
                }
            }
        }
    }

    #[test]
    fn path_labels_and_reversal() {
        let v = vocab(1, 2);
        let p = RelationPath::new(vec![
            DirectedRelationStep::forward(RelationId(0)),
            DirectedRelationStep::inverse(RelationId(1)),
        ]);
        assert_eq!(p.label(&v).to_string(), "r0.fwd/r1.inv");
        assert_eq!(p.reversed().label(&v).to_string(), "r1.fwd/r0.inv");
        assert_eq!(p.reversed().reversed(), p);
    }
}
