use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 10, min_leaf: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: bool,
        samples: usize,
        positives: usize,
    },
    /// `absent` and `present` index the children.
    Split {
        feature: u32,
        absent: usize,
        present: usize,
    },
}

/// One tested feature on a root-to-leaf route and whether it was present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTest {
    pub feature: u32,
    pub present: bool,
}

/// Binary CART tree over sparse binary features, split by Gini impurity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    rows: &'a [&'a [u32]],
    labels: &'a [bool],
    cfg: TreeConfig,
    counts: Vec<(usize, usize)>,
    nodes: Vec<Node>,
}

/// Sum of squared class counts over `n`, kept as a fraction to compare exactly.
fn purity(pos: usize, n: usize) -> (u128, u128) {
    let neg = n - pos;
    ((pos * pos + neg * neg) as u128, n as u128)
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let positives = idx.iter().filter(|&&i| self.labels[i]).count();
        self.nodes.push(Node::Leaf { class: 2 * positives > idx.len(), samples: idx.len(), positives });
        self.nodes.len() - 1
    }

    /// Feature minimizing weighted Gini, lowest index on ties. Both children
    /// must hold at least `min_leaf` samples.
    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<u32> {
        let n = idx.len();
        let mut touched: Vec<u32> = Vec::new();
        for &i in idx {
            for &f in self.rows[i] {
                let c = &mut self.counts[f as usize];
                if c.0 == 0 {
                    touched.push(f);
                }
                c.0 += 1;
                if self.labels[i] {
                    c.1 += 1;
                }
            }
        }
        touched.sort_unstable();
        // Minimizing weighted Gini is maximizing X/c + Y/a where X, Y are the
        // children's squared class counts.
        let mut best: Option<(u32, u128, u128)> = None;
        for &f in &touched {
            let (c, cp) = self.counts[f as usize];
            self.counts[f as usize] = (0, 0);
            let a = n - c;
            if c < self.cfg.min_leaf || a < self.cfg.min_leaf {
                continue;
            }
            let (x, _) = purity(cp, c);
            let (y, _) = purity(pos - cp, a);
            let num = x * a as u128 + y * c as u128;
            let den = (c * a) as u128;
            let better = match best {
                None => true,
                Some((_, bn, bd)) => num * bd > bn * den,
            };
            if better {
                best = Some((f, num, den));
            }
        }
        best.map(|b| b.0)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i]).count();
        if pos == 0 || pos == idx.len() || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf {
            return self.leaf(&idx);
        }
        let Some(f) = self.best_split(&idx, pos) else {
            return self.leaf(&idx);
        };
        let (present, absent): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.rows[i].binary_search(&f).is_ok());
        let me = self.nodes.len();
        self.nodes.push(Node::Split { feature: f, absent: 0, present: 0 });
        let a = self.grow(absent, depth + 1);
        let p = self.grow(present, depth + 1);
        self.nodes[me] = Node::Split { feature: f, absent: a, present: p };
        me
    }
}

impl DecisionTree {
    /// Fit on sparse rows (sorted feature ids) with binary labels.
    pub fn fit(rows: &[&[u32]], labels: &[bool], num_features: usize, cfg: TreeConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyExamples);
        }
        assert_eq!(rows.len(), labels.len());
        let min_leaf = cfg.min_leaf.max(1);
        let mut b = Builder {
            rows,
            labels,
            cfg: TreeConfig { min_leaf, ..cfg },
            counts: vec![(0, 0); num_features],
            nodes: Vec::new(),
        };
        b.grow((0..rows.len()).collect(), 0);
        Ok(DecisionTree { nodes: b.nodes })
    }

    /// A tree that always answers `class`.
    pub fn constant(class: bool) -> Self {
        DecisionTree { nodes: vec![Node::Leaf { class, samples: 0, positives: 0 }] }
    }

    pub fn predict(&self, row: &[u32]) -> bool {
        self.decide(row).0
    }

    /// Class plus the ordered tests on the route from root to leaf.
    pub fn decide(&self, row: &[u32]) -> (bool, Vec<PathTest>) {
        let mut at = 0;
        let mut route = Vec::new();
        loop {
            match self.nodes[at] {
                Node::Leaf { class, .. } => return (class, route),
                Node::Split { feature, absent, present } => {
                    let has = row.binary_search(&feature).is_ok();
                    route.push(PathTest { feature, present: has });
                    at = if has { present } else { absent };
                }
            }
        }
    }

    /// Class reached by replaying recorded branch outcomes from the root.
    pub fn replay(&self, route: &[PathTest]) -> Option<bool> {
        let mut at = 0;
        for test in route {
            match self.nodes[at] {
                Node::Split { feature, absent, present } if feature == test.feature => {
                    at = if test.present { present } else { absent };
                }
                _ => return None,
            }
        }
        match self.nodes[at] {
            Node::Leaf { class, .. } => Some(class),
            Node::Split { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { absent, present, .. } => 1 + go(t, absent).max(go(t, present)),
            }
        }
        go(self, 0)
    }

    pub fn max_feature(&self) -> Option<u32> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Fraction of `rows` whose prediction matches `labels`.
pub fn agreement(predict: impl Fn(&[u32]) -> bool, rows: &[&[u32]], labels: &[bool]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    let hits = rows.iter().zip(labels).filter(|(r, &y)| predict(r) == y).count();
    hits as f64 / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn xor() -> (Vec<Vec<u32>>, Vec<bool>) {
        (vec![vec![], vec![1], vec![0], vec![0, 1]], vec![false, true, true, false])
    }

    fn refs(rows: &[Vec<u32>]) -> Vec<&[u32]> {
        rows.iter().map(|r| r.as_slice()).collect()
    }

    /// Best training accuracy of any tree of depth at most 2 over two binary
    /// features, by enumerating every split structure and leaf labelling.
    fn best_depth2(rows: &[&[u32]], labels: &[bool]) -> f64 {
        let bit = |r: &[u32], f: u32| r.contains(&f);
        let mut best: f64 = 0.0;
        // Cells are identified by (root feature value, child feature value).
        for root in 0..2u32 {
            for left in 0..2u32 {
                for right in 0..2u32 {
                    for leaves in 0..16u32 {
                        let predict = |r: &[u32]| {
                            let a = bit(r, root);
                            let b = if a { bit(r, right) } else { bit(r, left) };
                            let cell = (a as u32) * 2 + b as u32;
                            leaves >> cell & 1 == 1
                        };
                        best = best.max(agreement(predict, rows, labels));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn xor_needs_and_gets_depth_two() {
        let (rows, labels) = xor();
        let rows = refs(&rows);
        assert_eq!(best_depth2(&rows, &labels), 1.0);
        let tree = DecisionTree::fit(&rows, &labels, 2, TreeConfig { max_depth: 2, min_leaf: 1 }).unwrap();
        assert_eq!(tree.depth(), 2);
        assert_eq!(agreement(|r| tree.predict(r), &rows, &labels), 1.0);
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let rows = [vec![0], vec![1], vec![]];
        let tree = DecisionTree::fit(&refs(&rows), &[true, true, true], 2, TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.decide(&[0]), (true, vec![]));
    }

    #[test]
    fn identical_rows_with_mixed_labels_are_irreducible() {
        let rows = [vec![0], vec![0], vec![0]];
        let labels = [true, false, false];
        let tree = DecisionTree::fit(&refs(&rows), &labels, 1, TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(!tree.predict(&[0]));
        assert!(agreement(|r| tree.predict(r), &refs(&rows), &labels) < 1.0);
    }

    #[test]
    fn majority_ties_go_negative() {
        let rows = [vec![], vec![]];
        let tree = DecisionTree::fit(&refs(&rows), &[true, false], 1, TreeConfig::default()).unwrap();
        assert!(!tree.predict(&[]));
    }

    #[test]
    fn hand_traced_depth_two_route() {
        // f0 alone separates all but the (f0 & f2) corner, which is negative.
        let rows = [vec![0], vec![0], vec![0, 2], vec![0, 2], vec![], vec![], vec![2]];
        let labels = [true, true, false, false, false, false, false];
        let tree = DecisionTree::fit(&refs(&rows), &labels, 3, TreeConfig { max_depth: 2, min_leaf: 1 }).unwrap();
        let (class, route) = tree.decide(&[0]);
        assert!(class);
        assert_eq!(route, vec![PathTest { feature: 0, present: true }, PathTest { feature: 2, present: false }]);
        assert_eq!(tree.decide(&[0]), (class, route.clone()));
        assert_eq!(tree.replay(&route), Some(true));
        assert_eq!(tree.decide(&[2]), (false, vec![PathTest { feature: 0, present: false }]));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(DecisionTree::fit(&[], &[], 0, TreeConfig::default()).is_err());
    }

    fn arb_data() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<bool>)> {
        prop::collection::vec((prop::collection::btree_set(0u32..6, 0..4), any::<bool>()), 1..30)
            .prop_map(|v| v.into_iter().map(|(s, y)| (s.into_iter().collect(), y)).unzip())
    }

    proptest! {
        #[test]
        fn unconstrained_tree_fits_consistent_data((rows, labels) in arb_data()) {
            // Drop rows that conflict with an earlier identical row.
            let mut keep_rows = Vec::new();
            let mut keep_labels = Vec::new();
            for (r, y) in rows.into_iter().zip(labels) {
                match keep_rows.iter().position(|k: &Vec<u32>| *k == r) {
                    Some(i) if keep_labels[i] != y => {}
                    _ => { keep_rows.push(r); keep_labels.push(y); }
                }
            }
            let rows = refs(&keep_rows);
            let tree = DecisionTree::fit(&rows, &keep_labels, 6, TreeConfig { max_depth: usize::MAX, min_leaf: 1 }).unwrap();
            prop_assert_eq!(agreement(|r| tree.predict(r), &rows, &keep_labels), 1.0);
        }

        #[test]
        fn order_invariant_and_replayable((rows, labels) in arb_data(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let cfg = TreeConfig { max_depth: 4, min_leaf: 1 };
            let tree = DecisionTree::fit(&refs(&rows), &labels, 6, cfg).unwrap();
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<Vec<u32>> = order.iter().map(|&i| rows[i].clone()).collect();
            let shuffled_labels: Vec<bool> = order.iter().map(|&i| labels[i]).collect();
            let other = DecisionTree::fit(&refs(&shuffled), &shuffled_labels, 6, cfg).unwrap();
            prop_assert!(tree.depth() <= 4);
            for r in &rows {
                prop_assert_eq!(tree.predict(r), other.predict(r));
                let (class, route) = tree.decide(r);
                prop_assert_eq!(tree.replay(&route), Some(class));
            }
        }
    }
}
