use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{AugmentedGraph, DirectedRelationStep, Direction, RelationPath};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Vocabulary};

fn neighbors(g: &KnowledgeGraph, e: EntityId) -> impl Iterator<Item = (DirectedRelationStep, EntityId)> + '_ {
    g.outgoing(e)
        .iter()
        .map(|&(r, x)| (DirectedRelationStep::forward(r), x))
        .chain(g.incoming(e).iter().map(|&(r, x)| (DirectedRelationStep::inverse(r), x)))
}

/// Relation paths packed into integers during the search: one base
/// `2·|R| + 1` digit per step, most significant first. Zero is never a
/// digit, so the length is implied.
#[derive(Clone, Copy)]
struct Codec {
    base: u128,
}

impl Codec {
    fn digit(s: DirectedRelationStep) -> u128 {
        2 * s.relation.0 as u128 + u128::from(s.direction == Direction::Inverse) + 1
    }

    fn push(self, code: u128, s: DirectedRelationStep) -> u128 {
        code * self.base + Self::digit(s)
    }

    fn decode(self, mut code: u128) -> RelationPath {
        let mut steps = Vec::new();
        while code > 0 {
            let d = code % self.base - 1;
            code /= self.base;
            let relation = RelationId((d / 2) as u32);
            steps.push(if d.is_multiple_of(2) {
                DirectedRelationStep::forward(relation)
            } else {
                DirectedRelationStep::inverse(relation)
            });
        }
        steps.reverse();
        RelationPath::new(steps)
    }
}

/// A trailing part of a path, ending at the tail.
struct Half {
    code: u128,
    len: u32,
    /// Range of its intermediate nodes (excluding the meeting node) in
    /// [`Halves::nodes`].
    inter: (u32, u32),
}

/// Backward halves grouped by meeting node.
struct Halves {
    start: Vec<u32>,
    items: Vec<Half>,
    nodes: Vec<EntityId>,
}

impl Halves {
    fn at(&self, e: EntityId) -> &[Half] {
        &self.items[self.start[e.index()] as usize..self.start[e.index() + 1] as usize]
    }

    fn inter(&self, h: &Half) -> &[EntityId] {
        &self.nodes[h.inter.0 as usize..h.inter.1 as usize]
    }
}

/// Enumerates the relation paths realized by simple node paths between two
/// entities. Intermediate nodes are pairwise distinct and differ from both
/// endpoints; the endpoints may coincide.
///
/// The search meets in the middle: a forward frontier grows `forward_depth`
/// steps from the head, a backward frontier grows the remaining steps from
/// the tail, and the two are joined on shared nodes.
pub struct PathExtractor<'g> {
    graph: &'g KnowledgeGraph,
    max_len: usize,
    forward_depth: usize,
    codec: Codec,
    /// `base^i`
    powers: Vec<u128>,
}

impl<'g> PathExtractor<'g> {
    pub fn new(g: &'g AugmentedGraph, max_len: usize) -> Self {
        Self::on_graph(g.graph(), max_len)
    }

    pub fn on_graph(graph: &'g KnowledgeGraph, max_len: usize) -> Self {
        assert!(max_len >= 1, "max_len must be at least 1");
        let base = 2 * graph.num_relations() as u128 + 1;
        let powers: Vec<u128> = (0..=max_len as u32)
            .map(|i| base.checked_pow(i).expect("max_len too large for the relation count"))
            .collect();
        PathExtractor { graph, max_len, forward_depth: max_len.div_ceil(2), codec: Codec { base }, powers }
    }

    /// Override the forward frontier depth, clamped to `1..=max_len`.
    pub fn with_forward_depth(mut self, depth: usize) -> Self {
        self.forward_depth = depth.clamp(1, self.max_len);
        self
    }

    /// Distinct relation paths from `h` to `t`. When `query` is given the
    /// bare forward step of that relation is dropped.
    pub fn paths(&self, h: EntityId, t: EntityId, query: Option<RelationId>) -> BTreeSet<RelationPath> {
        let backward = self.backward_halves(h, t);
        let mut out: Vec<u128> = Vec::new();
        let mut inter = Vec::with_capacity(self.max_len);
        self.forward(h, t, h, &backward, 0, 0, &mut inter, &mut out);
        out.sort_unstable();
        out.dedup();
        let skip = query.map(|r| Codec::digit(DirectedRelationStep::forward(r)));
        out.into_iter().filter(|&c| Some(c) != skip).map(|c| self.codec.decode(c)).collect()
    }

    fn backward_halves(&self, h: EntityId, t: EntityId) -> Halves {
        let depth = self.max_len - self.forward_depth;
        let mut raw: Vec<(EntityId, Half)> = Vec::new();
        let mut nodes = Vec::new();
        if depth > 0 {
            let mut path = Vec::new();
            self.backward(h, t, t, depth, 0, &mut path, &mut nodes, &mut raw);
        }
        // Counting sort by meeting node.
        let n = self.graph.num_entities();
        let mut start = vec![0u32; n + 1];
        for (e, _) in &raw {
            start[e.index() + 1] += 1;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut slots: Vec<Option<Half>> = (0..raw.len()).map(|_| None).collect();
        for (e, half) in raw {
            slots[fill[e.index()] as usize] = Some(half);
            fill[e.index()] += 1;
        }
        Halves { start, items: slots.into_iter().map(|x| x.expect("every slot filled")).collect(), nodes }
    }

    /// `path` holds the intermediates walked so far, nearest the tail first;
    /// `code` the steps so far in head-to-tail order.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        h: EntityId,
        t: EntityId,
        at: EntityId,
        depth: usize,
        code: u128,
        path: &mut Vec<EntityId>,
        nodes: &mut Vec<EntityId>,
        out: &mut Vec<(EntityId, Half)>,
    ) {
        let len = path.len();
        for (s, y) in neighbors(self.graph, at) {
            if y == h || y == t || path.contains(&y) {
                continue;
            }
            // Walking back from `at` to `y`; the path itself goes y -> at.
            let step = DirectedRelationStep { relation: s.relation, direction: s.direction.flip() };
            let c = Codec::digit(step) * self.powers[len] + code;
            let from = nodes.len() as u32;
            nodes.extend_from_slice(path);
            out.push((y, Half { code: c, len: len as u32 + 1, inter: (from, nodes.len() as u32) }));
            if len + 1 < depth {
                path.push(y);
                self.backward(h, t, y, depth, c, path, nodes, out);
                path.pop();
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn forward(
        &self,
        h: EntityId,
        t: EntityId,
        at: EntityId,
        backward: &Halves,
        code: u128,
        len: usize,
        inter: &mut Vec<EntityId>,
        out: &mut Vec<u128>,
    ) {
        for (s, y) in neighbors(self.graph, at) {
            let c = self.codec.push(code, s);
            if y == t {
                out.push(c);
            } else if y != h && !inter.contains(&y) {
                if len + 1 == self.forward_depth {
                    for half in backward.at(y) {
                        if backward.inter(half).iter().all(|n| !inter.contains(n)) {
                            out.push(c * self.powers[half.len as usize] + half.code);
                        }
                    }
                } else {
                    inter.push(y);
                    self.forward(h, t, y, backward, c, len + 1, inter, out);
                    inter.pop();
                }
            }
        }
    }
}

/// Relation paths of length at most `max_len` connecting `h` to `t` in G′.
pub fn extract_paths(
    g: &AugmentedGraph,
    h: EntityId,
    t: EntityId,
    max_len: usize,
    query: Option<RelationId>,
) -> BTreeSet<RelationPath> {
    PathExtractor::new(g, max_len).paths(h, t, query)
}

/// As [`extract_paths`] with an explicit forward frontier depth.
pub fn extract_paths_split(
    g: &AugmentedGraph,
    h: EntityId,
    t: EntityId,
    max_len: usize,
    forward_depth: usize,
    query: Option<RelationId>,
) -> BTreeSet<RelationPath> {
    PathExtractor::new(g, max_len).with_forward_depth(forward_depth).paths(h, t, query)
}

/// Binary path features for a list of entity pairs, stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFeatureMatrix {
    pub vocabulary: Vec<RelationPath>,
    pub pairs: Vec<(EntityId, EntityId)>,
    rows: Vec<Vec<u32>>,
    pair_index: HashMap<(EntityId, EntityId), usize>,
    path_ids: HashMap<RelationPath, u32>,
}

impl PathFeatureMatrix {
    /// Vocabulary in first-discovery order over `pairs`; within a pair,
    /// paths are taken in lexicographic step order. Repeated pairs keep
    /// their first occurrence.
    pub fn from_path_sets(pairs: impl IntoIterator<Item = ((EntityId, EntityId), BTreeSet<RelationPath>)>) -> Self {
        let mut m = PathFeatureMatrix {
            vocabulary: Vec::new(),
            pairs: Vec::new(),
            rows: Vec::new(),
            pair_index: HashMap::new(),
            path_ids: HashMap::new(),
        };
        for (pair, set) in pairs {
            if m.pair_index.contains_key(&pair) {
                continue;
            }
            let mut row: Vec<u32> = set
                .into_iter()
                .map(|p| {
                    *m.path_ids.entry(p).or_insert_with_key(|p| {
                        m.vocabulary.push(p.clone());
                        (m.vocabulary.len() - 1) as u32
                    })
                })
                .collect();
            row.sort_unstable();
            m.pair_index.insert(pair, m.rows.len());
            m.pairs.push(pair);
            m.rows.push(row);
        }
        m
    }

    /// A matrix from explicit sparse rows; `rows[i]` lists the feature ids
    /// present for `pairs[i]`.
    pub fn from_rows(
        vocabulary: Vec<RelationPath>,
        pairs: Vec<(EntityId, EntityId)>,
        rows: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if pairs.len() != rows.len() {
            return Err(Error::InvalidConfig("pairs and rows differ in length".into()));
        }
        let mut pair_index = HashMap::new();
        let mut sorted = Vec::with_capacity(rows.len());
        for (i, (pair, mut row)) in pairs.iter().zip(rows).enumerate() {
            if row.iter().any(|&j| j as usize >= vocabulary.len()) {
                return Err(Error::VocabularyMismatch);
            }
            row.sort_unstable();
            row.dedup();
            pair_index.entry(*pair).or_insert(i);
            sorted.push(row);
        }
        let path_ids = vocabulary.iter().enumerate().map(|(j, p)| (p.clone(), j as u32)).collect();
        Ok(PathFeatureMatrix { vocabulary, pairs, rows: sorted, pair_index, path_ids })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.vocabulary.len()
    }

    /// Sorted feature ids set in row `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn row_index(&self, h: EntityId, t: EntityId) -> Option<usize> {
        self.pair_index.get(&(h, t)).copied()
    }

    pub fn path_id(&self, p: &RelationPath) -> Option<u32> {
        self.path_ids.get(p).copied()
    }

    pub fn has(&self, i: usize, feature: usize) -> bool {
        self.rows[i].binary_search(&(feature as u32)).is_ok()
    }

    pub fn dense_row(&self, i: usize) -> Vec<bool> {
        let mut v = vec![false; self.num_features()];
        for &j in &self.rows[i] {
            v[j as usize] = true;
        }
        v
    }

    /// Feature ids of `paths` under this vocabulary, skipping unknown paths.
    pub fn encode(&self, paths: &BTreeSet<RelationPath>) -> Vec<u32> {
        let mut row: Vec<u32> = paths.iter().filter_map(|p| self.path_ids.get(p).copied()).collect();
        row.sort_unstable();
        row
    }
}

/// Path features for `pairs` under the query relation `query`.
pub fn build_feature_matrix(
    g: &AugmentedGraph,
    pairs: &[(EntityId, EntityId)],
    query: RelationId,
    max_len: usize,
) -> Result<PathFeatureMatrix> {
    if pairs.is_empty() {
        return Err(Error::EmptyExamples);
    }
    let ex = PathExtractor::new(g, max_len);
    let sets: Vec<BTreeSet<RelationPath>> = pairs.par_iter().map(|&(h, t)| ex.paths(h, t, Some(query))).collect();
    Ok(PathFeatureMatrix::from_path_sets(pairs.iter().copied().zip(sets)))
}

/// Write `pair_id<TAB>path_id,...` rows and a `path_id<TAB>label` vocabulary.
pub fn write_feature_dump(
    m: &PathFeatureMatrix,
    vocab: &Vocabulary,
    rows_path: &Path,
    vocab_path: &Path,
) -> Result<()> {
    let mut rows = String::new();
    for i in 0..m.len() {
        let ids: Vec<String> = m.row(i).iter().map(|j| j.to_string()).collect();
        writeln!(rows, "{i}\t{}", ids.join(",")).expect("write to string");
    }
    let mut names = String::new();
    for (j, p) in m.vocabulary.iter().enumerate() {
        writeln!(names, "{j}\t{}", p.label(vocab)).expect("write to string");
    }
    fs::write(rows_path, rows).map_err(|e| Error::io(rows_path, e))?;
    fs::write(vocab_path, names).map_err(|e| Error::io(vocab_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Triple, Vocabulary};
    use crate::sfe::Direction;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn vocab(ne: usize, nr: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::synthetic(ne, nr))
    }

    fn graph(ne: usize, nr: usize, facts: &[(u32, u32, u32)]) -> AugmentedGraph {
        let g = KnowledgeGraph::new(
            vocab(ne, nr),
            facts.iter().map(|&(h, r, t)| Triple::new(EntityId(h), RelationId(r), EntityId(t))),
        );
        AugmentedGraph::from_graph(&g)
    }

    fn fwd(r: u32) -> DirectedRelationStep {
        DirectedRelationStep::forward(RelationId(r))
    }

    fn inv(r: u32) -> DirectedRelationStep {
        DirectedRelationStep::inverse(RelationId(r))
    }

    /// Plain depth-first enumeration of simple node paths.
    fn dfs_oracle(g: &KnowledgeGraph, h: EntityId, t: EntityId, max_len: usize) -> BTreeSet<RelationPath> {
        fn go(
            g: &KnowledgeGraph,
            t: EntityId,
            at: EntityId,
            max_len: usize,
            visited: &mut Vec<EntityId>,
            steps: &mut Vec<DirectedRelationStep>,
            out: &mut BTreeSet<RelationPath>,
        ) {
            let mut moves: Vec<(DirectedRelationStep, EntityId)> = Vec::new();
            for f in g.facts() {
                if f.head == at {
                    moves.push((DirectedRelationStep::forward(f.relation), f.tail));
                }
                if f.tail == at {
                    moves.push((DirectedRelationStep::inverse(f.relation), f.head));
                }
            }
            for (s, y) in moves {
                steps.push(s);
                if y == t {
                    out.insert(RelationPath::new(steps.clone()));
                } else if !visited.contains(&y) && steps.len() < max_len {
                    visited.push(y);
                    go(g, t, y, max_len, visited, steps, out);
                    visited.pop();
                }
                steps.pop();
            }
        }
        let mut out = BTreeSet::new();
        go(g, t, h, max_len, &mut vec![h], &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn triangle_paths() {
        // A -r1-> B -r2-> C and A -r3-> C
        let g = graph(3, 4, &[(0, 1, 1), (1, 2, 2), (0, 3, 2)]);
        let got = extract_paths(&g, EntityId(0), EntityId(2), 2, None);
        let want: BTreeSet<_> = [RelationPath::new(vec![fwd(3)]), RelationPath::new(vec![fwd(1), fwd(2)])].into();
        assert_eq!(got, want);
    }

    #[test]
    fn self_pair_without_loop_has_no_single_step_path() {
        let g = graph(2, 1, &[(0, 0, 1)]);
        assert!(extract_paths(&g, EntityId(0), EntityId(0), 1, None).is_empty());
    }

    #[test]
    fn inverse_edges_are_traversed() {
        let g = graph(2, 2, &[(1, 1, 0)]);
        let got = extract_paths(&g, EntityId(0), EntityId(1), 1, None);
        assert_eq!(got, [RelationPath::new(vec![inv(1)])].into());
        assert_eq!(got.iter().next().unwrap().steps[0].direction, Direction::Inverse);
    }

    #[test]
    fn query_edge_is_excluded() {
        let g = graph(3, 2, &[(0, 0, 1), (0, 1, 2), (2, 1, 1)]);
        let got = extract_paths(&g, EntityId(0), EntityId(1), 2, Some(RelationId(0)));
        assert_eq!(got, [RelationPath::new(vec![fwd(1), fwd(1)])].into());
    }

    #[test]
    fn disjoint_pairs_give_block_diagonal_rows() {
        let g = graph(4, 2, &[(0, 0, 1), (2, 1, 3)]);
        let m = build_feature_matrix(&g, &[(EntityId(0), EntityId(1)), (EntityId(2), EntityId(3))], RelationId(1), 2)
            .unwrap();
        assert_eq!(m.num_features(), 1);
        assert_eq!(m.row(0), &[0]);
        assert!(m.row(1).is_empty(), "bare query relation is not a feature");
        let m = build_feature_matrix(&g, &[(EntityId(0), EntityId(1)), (EntityId(2), EntityId(3))], RelationId(0), 2)
            .unwrap();
        assert_eq!(m.row(0), &[] as &[u32]);
        assert_eq!(m.row(1), &[0]);
        assert!(build_feature_matrix(&g, &[], RelationId(0), 2).is_err());
    }

    #[test]
    fn dump_format() {
        let g = graph(3, 2, &[(0, 0, 1), (1, 1, 2)]);
        let m = build_feature_matrix(&g, &[(EntityId(0), EntityId(2)), (EntityId(1), EntityId(0))], RelationId(0), 2)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (rows, voc) = (dir.path().join("rows.tsv"), dir.path().join("vocab.tsv"));
        write_feature_dump(&m, g.vocab(), &rows, &voc).unwrap();
        assert_eq!(fs::read_to_string(rows).unwrap(), "0\t0\n1\t1\n");
        assert_eq!(fs::read_to_string(voc).unwrap(), "0\tr0.fwd/r1.fwd\n1\tr0.inv\n");
    }

    fn arb_graph() -> impl Strategy<Value = (usize, usize, Vec<(u32, u32, u32)>)> {
        (1usize..=8, 1usize..=4).prop_flat_map(|(ne, nr)| {
            let fact = (0..ne as u32, 0..nr as u32, 0..ne as u32);
            (Just(ne), Just(nr), prop::collection::vec(fact, 0..16))
        })
    }

    proptest! {
        #[test]
        fn matches_dfs_oracle_for_every_split((ne, nr, facts) in arb_graph(), max_len in 1usize..=3, h in 0u32..8, t in 0u32..8) {
            let (h, t) = (EntityId(h % ne as u32), EntityId(t % ne as u32));
            let g = graph(ne, nr, &facts);
            let want = dfs_oracle(g.graph(), h, t, max_len);
            for depth in 1..=max_len {
                prop_assert_eq!(&extract_paths_split(&g, h, t, max_len, depth, None), &want);
            }
            let reversed: BTreeSet<_> = extract_paths(&g, t, h, max_len, None).iter().map(RelationPath::reversed).collect();
            prop_assert_eq!(&reversed, &want);
        }

        #[test]
        fn matrix_bits_match_oracle((ne, nr, facts) in arb_graph(), pairs in prop::collection::vec((0u32..8, 0u32..8), 1..6)) {
            let g = graph(ne, nr, &facts);
            let pairs: Vec<_> = pairs.into_iter().map(|(a, b)| (EntityId(a % ne as u32), EntityId(b % ne as u32))).collect();
            let q = RelationId(0);
            let m = build_feature_matrix(&g, &pairs, q, 3).unwrap();
            prop_assert_eq!(&m, &build_feature_matrix(&g, &pairs, q, 3).unwrap());
            for (i, &(h, t)) in m.pairs.iter().enumerate() {
                let mut want = dfs_oracle(g.graph(), h, t, 3);
                want.remove(&RelationPath::new(vec![fwd(0)]));
                let got: BTreeSet<_> = m.row(i).iter().map(|&j| m.vocabulary[j as usize].clone()).collect();
                prop_assert_eq!(got, want);
            }
        }
    }
}
