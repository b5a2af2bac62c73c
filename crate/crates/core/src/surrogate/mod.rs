//! Interpretable stand-ins for the embedding's fact classifier: per-query
//! decision trees fit on nearby facts, plus global tree and logistic
//! baselines.

mod fidelity;
mod linear;
mod tree;

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId, Triple};
use crate::kge::EmbeddingModel;
use crate::sfe::{AugmentedGraph, PathExtractor, PathFeatureMatrix, RelationPath, DEFAULT_MAX_PATH_LENGTH};

pub use fidelity::{
    evaluate_fidelity, evaluate_fidelity_modes, f1_score, Confusion, FidelityReport, FoldReport, SurrogateMode,
};
pub use linear::{LinearConfig, LinearModel};
pub use tree::{agreement, DecisionTree, Node, PathTest, TreeConfig};

/// How pool facts are ranked against a query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// cos(h, h_k) + cos(t, t_k)
    #[default]
    HeadAndTail,
    /// cos(h, h_k)
    HeadOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub max_path_length: usize,
    pub tree: TreeConfig,
    pub linear: LinearConfig,
    /// Candidate neighborhood sizes.
    pub k_grid: Vec<usize>,
    /// Also consider the whole pool as a neighborhood.
    pub include_all: bool,
    /// Folds of the cross-validation that picks the neighborhood size.
    pub cv_folds: usize,
    pub similarity: SimilarityMode,
    /// Neighbor corruptions drawn per pool fact.
    pub pool_negatives: usize,
    /// How many nearest neighbors a corruption may draw from.
    pub corruption_neighbors: usize,
    /// Uniform random corruptions drawn per pool fact.
    pub pool_random_negatives: usize,
    /// Corruptions per test positive in the fidelity evaluation set.
    pub neg_ratio_eval: usize,
    /// Resampled evaluation folds.
    pub folds: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            max_path_length: DEFAULT_MAX_PATH_LENGTH,
            tree: TreeConfig::default(),
            linear: LinearConfig::default(),
            k_grid: vec![16, 32, 64],
            include_all: true,
            cv_folds: 3,
            similarity: SimilarityMode::default(),
            pool_negatives: 1,
            corruption_neighbors: 10,
            pool_random_negatives: 3,
            neg_ratio_eval: 1,
            folds: 5,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.max_path_length == 0 {
            return bad("max_path_length must be at least 1");
        }
        if self.k_grid.is_empty() && !self.include_all {
            return bad("k_grid is empty and include_all is off");
        }
        if self.k_grid.contains(&0) {
            return bad("k_grid entries must be positive");
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2");
        }
        if self.folds == 0 {
            return bad("folds must be at least 1");
        }
        Ok(())
    }
}

/// Facts of one relation labeled by the embedding, with their path features.
pub struct RelationPool {
    pub relation: RelationId,
    pub triples: Vec<Triple>,
    pub labels: Vec<bool>,
    pub features: PathFeatureMatrix,
    vocabulary: Arc<Vec<RelationPath>>,
    global_tree: OnceLock<DecisionTree>,
    global_linear: OnceLock<LinearModel>,
}

impl RelationPool {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn vocabulary(&self) -> &Arc<Vec<RelationPath>> {
        &self.vocabulary
    }

    pub fn row(&self, i: usize) -> &[u32] {
        self.features.row(i)
    }

    fn rows_of(&self, idx: &[usize]) -> (Vec<&[u32]>, Vec<bool>) {
        idx.iter().map(|&i| (self.row(i), self.labels[i])).unzip()
    }

    fn fit_tree_on(&self, idx: &[usize], cfg: TreeConfig) -> Result<DecisionTree> {
        let (rows, labels) = self.rows_of(idx);
        DecisionTree::fit(&rows, &labels, self.features.num_features(), cfg)
    }

    /// Tree fit on the whole pool.
    pub fn global_tree(&self, s: &Surrogates) -> &DecisionTree {
        self.global_tree.get_or_init(|| {
            let idx: Vec<usize> = (0..self.len()).collect();
            let (rows, labels) = self.rows_of(&idx);
            DecisionTree::fit(&rows, &labels, self.features.num_features(), s.cfg.tree)
                .unwrap_or_else(|_| DecisionTree::constant(false))
        })
    }

    /// Logistic regression fit on the whole pool.
    pub fn global_linear(&self, s: &Surrogates) -> &LinearModel {
        self.global_linear.get_or_init(|| {
            let idx: Vec<usize> = (0..self.len()).collect();
            let (rows, labels) = self.rows_of(&idx);
            LinearModel::fit(&rows, &labels, self.features.num_features(), s.cfg.linear)
                .unwrap_or(LinearModel { weights: vec![0.0; self.features.num_features()], bias: -1.0 })
        })
    }
}

/// Pool facts chosen for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingNeighborhood {
    pub query: Triple,
    /// Pool indices, most similar first.
    pub indices: Vec<usize>,
    pub similarity: Vec<f64>,
    /// Held-out agreement that selected this size.
    pub cv_fidelity: f64,
}

impl TrainingNeighborhood {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `(triple, label, feature row)` per example.
    pub fn examples<'p>(&self, pool: &'p RelationPool) -> Vec<(Triple, bool, &'p [u32])> {
        self.indices.iter().map(|&i| (pool.triples[i], pool.labels[i], pool.row(i))).collect()
    }
}

/// Decision tree explaining one query.
#[derive(Clone, Debug)]
pub struct LocalTreeModel {
    pub query: Triple,
    pub tree: DecisionTree,
    pub vocabulary: Arc<Vec<RelationPath>>,
    pub neighborhood_k: usize,
    pub fidelity_on_train: f64,
    pub cv_fidelity: f64,
}

impl LocalTreeModel {
    /// Paths tested present on the route taken for `row`, root first.
    pub fn supporting_paths(&self, row: &[u32]) -> Result<Vec<RelationPath>> {
        let (_, route) = classify_surrogate(self, row)?;
        Ok(route.into_iter().filter(|t| t.present).map(|t| self.vocabulary[t.feature as usize].clone()).collect())
    }
}

/// Class and decision path of `row` under a local tree.
pub fn classify_surrogate(model: &LocalTreeModel, row: &[u32]) -> Result<(bool, Vec<PathTest>)> {
    let n = model.vocabulary.len() as u32;
    if row.iter().any(|&f| f >= n) || model.tree.max_feature().is_some_and(|f| f >= n) {
        return Err(Error::VocabularyMismatch);
    }
    Ok(model.tree.decide(row))
}

/// Per-query surrogate construction against a fixed model and G′.
pub struct Surrogates<'a> {
    pub model: &'a EmbeddingModel,
    pub graph: &'a AugmentedGraph,
    pub cfg: SurrogateConfig,
    units: Vec<Option<Vec<f64>>>,
    neighbors: OnceLock<Vec<Vec<EntityId>>>,
}

impl<'a> Surrogates<'a> {
    pub fn new(model: &'a EmbeddingModel, graph: &'a AugmentedGraph, cfg: SurrogateConfig) -> Self {
        let units = (0..model.num_entities())
            .map(|e| {
                let v = model.parameters().entity(EntityId(e as u32));
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                (norm > 0.0).then(|| v.iter().map(|x| x / norm).collect())
            })
            .collect();
        Surrogates { model, graph, cfg, units, neighbors: OnceLock::new() }
    }

    fn cos(&self, a: EntityId, b: EntityId) -> f64 {
        match (&self.units[a.index()], &self.units[b.index()]) {
            (Some(x), Some(y)) => x.iter().zip(y).map(|(p, q)| p * q).sum(),
            _ => -1.0,
        }
    }

    /// Similarity of pool fact `k` to query `q` under the configured mode.
    pub fn similarity(&self, q: &Triple, k: &Triple) -> f64 {
        match self.cfg.similarity {
            SimilarityMode::HeadAndTail => self.cos(q.head, k.head) + self.cos(q.tail, k.tail),
            SimilarityMode::HeadOnly => self.cos(q.head, k.head),
        }
    }

    fn corruption_neighbors(&self) -> &Vec<Vec<EntityId>> {
        self.neighbors.get_or_init(|| {
            let n = self.model.num_entities();
            let k = self.cfg.corruption_neighbors.min(n.saturating_sub(1));
            (0..n as u32)
                .into_par_iter()
                .map(
                    |e| {
                        if k == 0 {
                            Vec::new()
                        } else {
                            self.model.nearest_neighbors(EntityId(e), k).expect("in range")
                        }
                    },
                )
                .collect()
        })
    }

    /// Path features of `(h, t)` under query relation `r`.
    pub fn paths(&self, q: &Triple) -> BTreeSet<RelationPath> {
        PathExtractor::new(self.graph, self.cfg.max_path_length).paths(q.head, q.tail, Some(q.relation))
    }

    /// Feature row of `q` in the pool's vocabulary.
    pub fn row(&self, pool: &RelationPool, q: &Triple) -> Vec<u32> {
        match pool.features.row_index(q.head, q.tail) {
            Some(i) if pool.triples[i] == *q => pool.row(i).to_vec(),
            _ => pool.features.encode(&self.paths(q)),
        }
    }

    /// The G′ facts of `r` plus their corruptions, labeled by the model.
    /// Triples in `exclude` never enter the pool.
    pub fn build_pool(&self, r: RelationId, exclude: &HashSet<Triple>, rng: &mut impl Rng) -> RelationPool {
        let positives: Vec<Triple> =
            self.graph.graph().facts().iter().filter(|t| t.relation == r && !exclude.contains(t)).copied().collect();
        let mut set: BTreeSet<Triple> = positives.iter().copied().collect();
        let n = self.model.num_entities() as u32;
        let neighbors = if self.cfg.pool_negatives > 0 { Some(self.corruption_neighbors()) } else { None };
        for t in &positives {
            for _ in 0..self.cfg.pool_negatives {
                let head = rng.gen_bool(0.5);
                let e = if head { t.head } else { t.tail };
                let Some(&sub) = neighbors.and_then(|nb| nb[e.index()].choose(rng)) else { continue };
                let c = if head { Triple { head: sub, ..*t } } else { Triple { tail: sub, ..*t } };
                if !exclude.contains(&c) {
                    set.insert(c);
                }
            }
            for _ in 0..self.cfg.pool_random_negatives {
                let e = EntityId(rng.gen_range(0..n));
                let c = if rng.gen_bool(0.5) { Triple { head: e, ..*t } } else { Triple { tail: e, ..*t } };
                if !exclude.contains(&c) {
                    set.insert(c);
                }
            }
        }
        self.pool_from(r, set.into_iter().collect())
    }

    /// A pool over exactly `triples` (deduplicated, canonical order).
    pub fn pool_from(&self, r: RelationId, mut triples: Vec<Triple>) -> RelationPool {
        triples.sort();
        triples.dedup();
        debug_assert!(triples.iter().all(|t| t.relation == r));
        let ex = PathExtractor::new(self.graph, self.cfg.max_path_length);
        let sets: Vec<BTreeSet<RelationPath>> = triples.par_iter().map(|t| ex.paths(t.head, t.tail, Some(r))).collect();
        let labels: Vec<bool> = triples.iter().map(|t| self.model.is_true(t)).collect();
        let features = PathFeatureMatrix::from_path_sets(triples.iter().map(|t| (t.head, t.tail)).zip(sets));
        if !labels.is_empty() && (labels.iter().all(|&y| y) || labels.iter().all(|&y| !y)) {
            warn!(relation = r.0, "surrogate pool holds a single class");
        }
        RelationPool {
            relation: r,
            vocabulary: Arc::new(features.vocabulary.clone()),
            triples,
            labels,
            features,
            global_tree: OnceLock::new(),
            global_linear: OnceLock::new(),
        }
    }

    /// Held-out agreement on `probe` of trees fit on `train`. The probe set
    /// is split into folds by pool order; each fold is scored by a tree fit
    /// on `train` minus that fold.
    fn cross_validate(&self, pool: &RelationPool, train: &[usize], probe: &[usize]) -> f64 {
        let mut order = probe.to_vec();
        order.sort_unstable();
        let folds = self.cfg.cv_folds.min(order.len());
        let fit = |held: &HashSet<usize>| {
            let idx: Vec<usize> = train.iter().copied().filter(|i| !held.contains(i)).collect();
            pool.fit_tree_on(&idx, self.cfg.tree).ok()
        };
        let mut hits = 0usize;
        if folds < 2 {
            if let Some(tree) = fit(&HashSet::new()) {
                hits = order.iter().filter(|&&i| tree.predict(pool.row(i)) == pool.labels[i]).count();
            }
        } else {
            for f in 0..folds {
                let held: HashSet<usize> =
                    order.iter().enumerate().filter(|(p, _)| p % folds == f).map(|(_, &i)| i).collect();
                if let Some(tree) = fit(&held) {
                    hits += held.iter().filter(|&&i| tree.predict(pool.row(i)) == pool.labels[i]).count();
                }
            }
        }
        hits as f64 / order.len().max(1) as f64
    }

    /// Pool indices ranked by similarity to `q`, ties by pool order. The
    /// query itself is skipped.
    pub fn rank_pool(&self, q: &Triple, pool: &RelationPool) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> =
            pool.triples.iter().enumerate().filter(|(_, t)| *t != q).map(|(i, t)| (i, self.similarity(q, t))).collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        ranked
    }

    /// Neighborhood size maximizing cross-validated agreement with the
    /// model on the query's closest pool facts; ties go to the smaller size.
    ///
    /// Every candidate size is scored on the same probe set, the smallest
    /// candidate neighborhood, so that sizes compete on the region around
    /// the query rather than on neighborhoods of differing difficulty.
    pub fn select_neighborhood(&self, q: &Triple, pool: &RelationPool) -> Result<TrainingNeighborhood> {
        if pool.is_empty() {
            return Err(Error::EmptyExamples);
        }
        let ranked = self.rank_pool(q, pool);
        if ranked.is_empty() {
            return Err(Error::EmptyExamples);
        }
        let full = ranked.len();
        let mut sizes: Vec<usize> = self.cfg.k_grid.iter().map(|&k| k.min(full)).collect();
        if self.cfg.include_all {
            sizes.push(full);
        }
        sizes.sort_unstable();
        sizes.dedup();
        let probe: Vec<usize> = ranked[..sizes[0]].iter().map(|p| p.0).collect();
        let mut best: Option<(usize, f64)> = None;
        for &k in &sizes {
            let idx: Vec<usize> = ranked[..k].iter().map(|p| p.0).collect();
            let cv = self.cross_validate(pool, &idx, &probe);
            if best.is_none_or(|(_, b)| cv > b) {
                best = Some((k, cv));
            }
        }
        let (k, cv) = best.expect("at least one size");
        Ok(TrainingNeighborhood {
            query: *q,
            indices: ranked[..k].iter().map(|p| p.0).collect(),
            similarity: ranked[..k].iter().map(|p| p.1).collect(),
            cv_fidelity: cv,
        })
    }

    /// Fit a tree on a chosen neighborhood.
    pub fn fit_tree(&self, pool: &RelationPool, nbhd: &TrainingNeighborhood) -> Result<LocalTreeModel> {
        if nbhd.is_empty() {
            return Err(Error::EmptyExamples);
        }
        let tree = if nbhd.len() == pool.len() {
            pool.global_tree(self).clone()
        } else {
            pool.fit_tree_on(&nbhd.indices, self.cfg.tree)?
        };
        let (rows, labels) = pool.rows_of(&nbhd.indices);
        Ok(LocalTreeModel {
            query: nbhd.query,
            fidelity_on_train: agreement(|r| tree.predict(r), &rows, &labels),
            tree,
            vocabulary: pool.vocabulary.clone(),
            neighborhood_k: nbhd.len(),
            cv_fidelity: nbhd.cv_fidelity,
        })
    }

    /// Select a neighborhood for `q` and fit its tree.
    pub fn fit_local(&self, q: &Triple, pool: &RelationPool) -> Result<LocalTreeModel> {
        let nbhd = self.select_neighborhood(q, pool)?;
        self.fit_tree(pool, &nbhd)
    }
}
