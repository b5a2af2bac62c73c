use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, Triple};
use crate::kge::{logistic, EmbeddingModel};
use crate::sfe::{AugmentedGraph, DirectedRelationStep, Direction, RelationPath};

pub const DEFAULT_BEAM: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingConfig {
    /// Partial paths kept per depth on each side; `None` searches exhaustively.
    pub beam: Option<usize>,
    /// Only accept hops that are facts of G′ (still subject to the model).
    pub graph_only: bool,
}

impl Default for GroundingConfig {
    fn default() -> Self {
        GroundingConfig { beam: Some(DEFAULT_BEAM), graph_only: false }
    }
}

impl GroundingConfig {
    pub fn exhaustive() -> Self {
        GroundingConfig { beam: None, graph_only: false }
    }
}

/// One fact of a grounded chain, walked in `direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundedHop {
    pub fact: Triple,
    pub direction: Direction,
    pub plausibility: f64,
}

impl GroundedHop {
    /// Entity the walk leaves from.
    pub fn from(&self) -> EntityId {
        match self.direction {
            Direction::Forward => self.fact.head,
            Direction::Inverse => self.fact.tail,
        }
    }

    /// Entity the walk arrives at.
    pub fn to(&self) -> EntityId {
        match self.direction {
            Direction::Forward => self.fact.tail,
            Direction::Inverse => self.fact.head,
        }
    }
}

/// A relation path instantiated with entities, every hop believed by the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundedPath {
    pub query: Triple,
    pub relation_path: RelationPath,
    pub hops: Vec<GroundedHop>,
    pub belief: f64,
}

impl GroundedPath {
    /// Entities visited, query head first.
    pub fn nodes(&self) -> Vec<EntityId> {
        let mut v = Vec::with_capacity(self.hops.len() + 1);
        if let Some(first) = self.hops.first() {
            v.push(first.from());
        }
        v.extend(self.hops.iter().map(|h| h.to()));
        v
    }
}

/// Belief descending, then visited entity ids ascending.
pub(crate) fn by_belief(a: &GroundedPath, b: &GroundedPath) -> Ordering {
    b.belief.partial_cmp(&a.belief).unwrap_or(Ordering::Equal).then_with(|| a.nodes().cmp(&b.nodes()))
}

#[derive(Clone)]
struct Partial {
    nodes: Vec<EntityId>,
    hops: Vec<GroundedHop>,
    belief: f64,
}

struct Grounder<'a> {
    m: &'a EmbeddingModel,
    g: &'a AugmentedGraph,
    cfg: &'a GroundingConfig,
    head: EntityId,
    tail: EntityId,
}

impl Grounder<'_> {
    /// Raw scores of `step.fact(anchor, e)` (or `step.fact(e, anchor)` when
    /// `anchor_is_from` is false) for every entity `e`.
    fn scores(&self, step: DirectedRelationStep, anchor: EntityId, anchor_is_from: bool) -> Vec<f64> {
        if (step.direction == Direction::Forward) == anchor_is_from {
            self.m.score_tails(anchor, step.relation)
        } else {
            self.m.score_heads(step.relation, anchor)
        }
    }

    fn hop(&self, step: DirectedRelationStep, from: EntityId, to: EntityId, raw: f64) -> Option<GroundedHop> {
        let fact = step.fact(from, to);
        if raw < self.m.threshold(step.relation) || (self.cfg.graph_only && !self.g.contains(&fact)) {
            return None;
        }
        Some(GroundedHop { fact, direction: step.direction, plausibility: logistic(raw) })
    }

    fn usable(&self, e: EntityId, taken: &[EntityId]) -> bool {
        e != self.head && e != self.tail && !taken.contains(&e)
    }

    /// Grow every partial by one step away from its last node. Forward
    /// partials walk `step` as written; backward ones arrive at their last
    /// node through it.
    fn expand(&self, frontier: Vec<Partial>, step: DirectedRelationStep, forward: bool) -> Vec<Partial> {
        let mut next = Vec::new();
        for p in frontier {
            let anchor = *p.nodes.last().expect("partials are seeded with an endpoint");
            for (e, &raw) in self.scores(step, anchor, forward).iter().enumerate() {
                let e = EntityId(e as u32);
                if !self.usable(e, &p.nodes) {
                    continue;
                }
                let (from, to) = if forward { (anchor, e) } else { (e, anchor) };
                if let Some(h) = self.hop(step, from, to, raw) {
                    let mut q = p.clone();
                    q.nodes.push(e);
                    q.belief *= h.plausibility;
                    q.hops.push(h);
                    next.push(q);
                }
            }
        }
        self.prune(next)
    }

    fn prune(&self, mut v: Vec<Partial>) -> Vec<Partial> {
        if let Some(beam) = self.cfg.beam {
            v.sort_by(|a, b| {
                b.belief.partial_cmp(&a.belief).unwrap_or(Ordering::Equal).then_with(|| a.nodes.cmp(&b.nodes))
            });
            v.truncate(beam.max(1));
        }
        v
    }
}

/// Entity chains realizing `p` between the query's endpoints.
///
/// A forward search from the head consumes the leading steps and a backward
/// search from the tail the trailing ones. The two meet at a connecting
/// entity that must be believed both as the tail of the forward hop and as
/// the head of the backward hop. Intermediate entities are distinct and
/// differ from both endpoints, as in path extraction.
pub fn ground_path(
    q: &Triple,
    p: &RelationPath,
    m: &EmbeddingModel,
    g: &AugmentedGraph,
    cfg: &GroundingConfig,
) -> Vec<GroundedPath> {
    let steps = &p.steps;
    let len = steps.len();
    if len == 0 {
        return Vec::new();
    }
    let gr = Grounder { m, g, cfg, head: q.head, tail: q.tail };
    let finish = |hops: Vec<GroundedHop>| GroundedPath {
        query: *q,
        relation_path: p.clone(),
        belief: hops.iter().map(|h| h.plausibility).product(),
        hops,
    };

    if len == 1 {
        let fact = steps[0].fact(q.head, q.tail);
        return gr.hop(steps[0], q.head, q.tail, m.raw_score(&fact)).map(|h| finish(vec![h])).into_iter().collect();
    }

    let fwd_depth = len.div_ceil(2);
    let seed = |e: EntityId| vec![Partial { nodes: vec![e], hops: Vec::new(), belief: 1.0 }];
    let mut forward = seed(q.head);
    for &step in &steps[..fwd_depth - 1] {
        forward = gr.expand(forward, step, true);
    }
    let mut backward = seed(q.tail);
    for &step in steps[fwd_depth + 1..].iter().rev() {
        backward = gr.expand(backward, step, false);
    }

    // The meeting hops: steps[fwd_depth - 1] out of the forward frontier and
    // steps[fwd_depth] into the backward frontier.
    let (into, out_of) = (steps[fwd_depth - 1], steps[fwd_depth]);
    let mut from_x: HashMap<EntityId, Vec<f64>> = HashMap::new();
    let mut into_y: HashMap<EntityId, Vec<f64>> = HashMap::new();
    let mut found = Vec::new();
    for f in &forward {
        let x = *f.nodes.last().expect("seeded");
        let sx = from_x.entry(x).or_insert_with(|| gr.scores(into, x, true)).clone();
        for b in &backward {
            if f.nodes[1..].iter().any(|n| b.nodes[1..].contains(n)) {
                continue;
            }
            let y = *b.nodes.last().expect("seeded");
            let sy = into_y.entry(y).or_insert_with(|| gr.scores(out_of, y, false));
            for (e, (&ra, &rb)) in sx.iter().zip(sy.iter()).enumerate() {
                let e = EntityId(e as u32);
                if !gr.usable(e, &f.nodes) || b.nodes.contains(&e) {
                    continue;
                }
                let (Some(ha), Some(hb)) = (gr.hop(into, x, e, ra), gr.hop(out_of, e, y, rb)) else { continue };
                let mut hops = f.hops.clone();
                hops.push(ha);
                hops.push(hb);
                hops.extend(b.hops.iter().rev().copied());
                found.push(finish(hops));
            }
        }
    }
    found.sort_by(by_belief);
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KnowledgeGraph, RelationId, Vocabulary};
    use proptest::prelude::*;
    use std::collections::{BTreeSet, HashSet};
    use std::sync::Arc;

    fn t(h: u32, r: u32, tl: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(r), EntityId(tl))
    }

    /// Model believing exactly `facts`, with raw score `base + h + t` so
    /// plausibilities differ between hops.
    fn believer(ne: usize, nr: usize, facts: &HashSet<Triple>) -> EmbeddingModel {
        let facts = facts.clone();
        let mut m = EmbeddingModel::from_score_table(ne, nr, move |x| {
            if facts.contains(&x) {
                1.0 + 0.1 * x.head.0 as f64 + 0.01 * x.tail.0 as f64
            } else {
                -1.0
            }
        });
        for r in 0..nr {
            m.set_threshold(RelationId(r as u32), 0.0);
        }
        m
    }

    fn graph(ne: usize, nr: usize, facts: &HashSet<Triple>) -> AugmentedGraph {
        let vocab = Vocabulary::synthetic(ne, nr);
        AugmentedGraph::from_graph(&KnowledgeGraph::new(Arc::new(vocab), facts.iter().copied()))
    }

    /// Every node sequence following `p`, intermediates drawn from all
    /// entities, kept when each hop is believed.
    fn oracle(q: &Triple, p: &RelationPath, m: &EmbeddingModel, ne: u32) -> BTreeSet<Vec<EntityId>> {
        fn walk(
            at: usize,
            nodes: &mut Vec<EntityId>,
            q: &Triple,
            p: &RelationPath,
            m: &EmbeddingModel,
            ne: u32,
            out: &mut BTreeSet<Vec<EntityId>>,
        ) {
            let last = *nodes.last().unwrap();
            if at == p.len() {
                if last == q.tail {
                    out.insert(nodes.clone());
                }
                return;
            }
            for e in 0..ne {
                let e = EntityId(e);
                let final_hop = at + 1 == p.len();
                if final_hop != (e == q.tail) {
                    continue;
                }
                if !final_hop && (e == q.head || nodes.contains(&e)) {
                    continue;
                }
                if m.is_true(&p.steps[at].fact(last, e)) {
                    nodes.push(e);
                    walk(at + 1, nodes, q, p, m, ne, out);
                    nodes.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(0, &mut vec![q.head], q, p, m, ne, &mut out);
        out
    }

    fn fwd(r: u32) -> DirectedRelationStep {
        DirectedRelationStep::forward(RelationId(r))
    }

    fn inv(r: u32) -> DirectedRelationStep {
        DirectedRelationStep::inverse(RelationId(r))
    }

    #[test]
    fn single_hop_is_the_query_fact_itself() {
        let facts: HashSet<Triple> = [t(0, 0, 1)].into();
        let (m, g) = (believer(3, 1, &facts), graph(3, 1, &facts));
        let p = RelationPath::new(vec![fwd(0)]);
        let got = ground_path(&t(0, 0, 1), &p, &m, &g, &GroundingConfig::default());
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].hops[0].fact, t(0, 0, 1));
        assert!(ground_path(&t(0, 0, 2), &p, &m, &g, &GroundingConfig::default()).is_empty());
    }

    #[test]
    fn two_hops_match_enumeration_and_multiply_beliefs() {
        // 0 -r0-> {1, 2, 3} -r1-> 4, entity 3 fails the second hop.
        let facts: HashSet<Triple> = [t(0, 0, 1), t(0, 0, 2), t(0, 0, 3), t(1, 1, 4), t(2, 1, 4)].into();
        let (m, g) = (believer(5, 2, &facts), graph(5, 2, &facts));
        let q = t(0, 0, 4);
        let p = RelationPath::new(vec![fwd(0), fwd(1)]);
        let got = ground_path(&q, &p, &m, &g, &GroundingConfig::exhaustive());
        let nodes: BTreeSet<Vec<EntityId>> = got.iter().map(|x| x.nodes()).collect();
        assert_eq!(nodes, oracle(&q, &p, &m, 5));
        assert_eq!(nodes.len(), 2);
        for gp in &got {
            let expect = m.plausibility(&gp.hops[0].fact) * m.plausibility(&gp.hops[1].fact);
            assert!((gp.belief - expect).abs() < 1e-12);
        }
        // Entity 2 has the larger score on the second hop.
        assert_eq!(got[0].nodes()[1], EntityId(2));
    }

    #[test]
    fn inverse_steps_orient_hops() {
        // Path 0 -r0-> 1 <-r0- 2 grounds (0, r0, 1) forward then (2, r0, 1) inverse.
        let facts: HashSet<Triple> = [t(0, 0, 1), t(2, 0, 1)].into();
        let (m, g) = (believer(3, 1, &facts), graph(3, 1, &facts));
        let p = RelationPath::new(vec![fwd(0), inv(0)]);
        let got = ground_path(&t(0, 0, 2), &p, &m, &g, &GroundingConfig::default());
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].hops[1].fact, t(2, 0, 1));
        assert_eq!(got[0].hops[1].direction, Direction::Inverse);
        assert_eq!(got[0].nodes(), vec![EntityId(0), EntityId(1), EntityId(2)]);
    }

    #[test]
    fn graph_only_drops_hops_missing_from_the_graph() {
        let facts: HashSet<Triple> = [t(0, 0, 1), t(1, 1, 2)].into();
        let m = believer(3, 2, &facts);
        let g = graph(3, 2, &[t(0, 0, 1)].into());
        let p = RelationPath::new(vec![fwd(0), fwd(1)]);
        let q = t(0, 0, 2);
        assert_eq!(ground_path(&q, &p, &m, &g, &GroundingConfig::default()).len(), 1);
        let only = GroundingConfig { graph_only: true, ..Default::default() };
        assert!(ground_path(&q, &p, &m, &g, &only).is_empty());
    }

    #[test]
    fn narrow_beam_keeps_the_strongest_prefix() {
        let facts: HashSet<Triple> =
            [t(0, 0, 1), t(0, 0, 2), t(1, 0, 3), t(2, 0, 3), t(3, 0, 5), t(0, 0, 4), t(4, 0, 3)].into();
        let (m, g) = (believer(6, 1, &facts), graph(6, 1, &facts));
        let p = RelationPath::new(vec![fwd(0), fwd(0), fwd(0)]);
        let q = t(0, 0, 5);
        let all = ground_path(&q, &p, &m, &g, &GroundingConfig::exhaustive());
        assert_eq!(all.len(), 3);
        let narrow = ground_path(&q, &p, &m, &g, &GroundingConfig { beam: Some(1), graph_only: false });
        assert_eq!(narrow.len(), 1);
        // Prefix 0 -> 4 has the largest first-hop score.
        assert_eq!(narrow[0].nodes()[1], EntityId(4));
    }

    fn arb_case() -> impl Strategy<Value = (usize, usize, HashSet<Triple>, Triple, RelationPath)> {
        (2usize..=8, 1usize..=4).prop_flat_map(|(ne, nr)| {
            let fact = (0..ne as u32, 0..nr as u32, 0..ne as u32).prop_map(|(h, r, tl)| t(h, r, tl));
            let step = (0..nr as u32, any::<bool>()).prop_map(|(r, f)| if f { fwd(r) } else { inv(r) });
            (
                Just(ne),
                Just(nr),
                prop::collection::hash_set(fact.clone(), 0..24),
                fact,
                prop::collection::vec(step, 1..=3).prop_map(RelationPath::new),
            )
        })
    }

    proptest! {
        #[test]
        fn exhaustive_and_wide_beam_match_enumeration((ne, nr, facts, q, p) in arb_case()) {
            let (m, g) = (believer(ne, nr, &facts), graph(ne, nr, &facts));
            let expect = oracle(&q, &p, &m, ne as u32);
            for cfg in [GroundingConfig::exhaustive(), GroundingConfig { beam: Some(ne * ne), graph_only: false }] {
                let got = ground_path(&q, &p, &m, &g, &cfg);
                let nodes: BTreeSet<Vec<EntityId>> = got.iter().map(|x| x.nodes()).collect();
                prop_assert_eq!(nodes.len(), got.len());
                prop_assert_eq!(&nodes, &expect);
                for gp in &got {
                    prop_assert_eq!(gp.hops.len(), p.len());
                    for (h, s) in gp.hops.iter().zip(&p.steps) {
                        prop_assert!(m.is_true(&h.fact));
                        prop_assert_eq!(h.fact.relation, s.relation);
                        prop_assert_eq!(h.direction, s.direction);
                    }
                    let prod: f64 = gp.hops.iter().map(|h| m.plausibility(&h.fact)).product();
                    prop_assert!((gp.belief - prod).abs() < 1e-12);
                }
                prop_assert!(got.windows(2).all(|w| by_belief(&w[0], &w[1]) != Ordering::Greater));
            }
        }
    }
}
