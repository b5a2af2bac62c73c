//! Tucker-style tensor factorization embedding.
//!
//! A triple is scored by contracting the core tensor `W` (d_E × d_R × d_E)
//! with the head vector, relation vector and tail vector:
//!
//! ```text
//! f(h, r, t) = Σ_i Σ_k Σ_j W[i,k,j] · v_h[i] · w_r[k] · v_t[j]
//! ```
//!
//! The model caches one `d_E × d_E` operator `M_r = W ×₂ w_r` per relation so
//! that scoring is `(v_hᵀ M_r) · v_t`. Every scoring entry point goes through
//! the same head projection, so batched and one-at-a-time scores are
//! bit-identical.

mod calibrate;
mod checkpoint;
mod eval;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId, Triple};

pub use calibrate::{calibrate_thresholds, generate_negatives, Calibration};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use eval::{link_prediction, LinkPredictionReport};
pub use train::{batch_loss_and_gradient, train, train_with_history, Optimizer, TrainConfig, TrainHistory};

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Raw parameter arrays, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub num_entities: usize,
    pub num_relations: usize,
    pub entity_dim: usize,
    pub relation_dim: usize,
    /// `num_entities × entity_dim`
    pub entity_vectors: Vec<f64>,
    /// `num_relations × relation_dim`
    pub relation_vectors: Vec<f64>,
    /// `entity_dim × relation_dim × entity_dim`, index `(i * d_R + k) * d_E + j`
    pub core_tensor: Vec<f64>,
}

impl Parameters {
    pub fn zeros(num_entities: usize, num_relations: usize, entity_dim: usize, relation_dim: usize) -> Self {
        Parameters {
            num_entities,
            num_relations,
            entity_dim,
            relation_dim,
            entity_vectors: vec![0.0; num_entities * entity_dim],
            relation_vectors: vec![0.0; num_relations * relation_dim],
            core_tensor: vec![0.0; entity_dim * relation_dim * entity_dim],
        }
    }

    pub fn entity(&self, e: EntityId) -> &[f64] {
        let d = self.entity_dim;
        &self.entity_vectors[e.index() * d..(e.index() + 1) * d]
    }

    pub fn relation(&self, r: RelationId) -> &[f64] {
        let d = self.relation_dim;
        &self.relation_vectors[r.index() * d..(r.index() + 1) * d]
    }

    pub fn core(&self, i: usize, k: usize, j: usize) -> f64 {
        self.core_tensor[(i * self.relation_dim + k) * self.entity_dim + j]
    }

    pub fn all_finite(&self) -> bool {
        self.entity_vectors.iter().chain(&self.relation_vectors).chain(&self.core_tensor).all(|x| x.is_finite())
    }

    /// `M_r[i][j] = Σ_k w_r[k] W[i,k,j]`, row-major `d_E × d_E`.
    pub fn relation_operator(&self, r: RelationId) -> Vec<f64> {
        let de = self.entity_dim;
        let dr = self.relation_dim;
        let w = self.relation(r);
        let mut m = vec![0.0; de * de];
        for i in 0..de {
            let row = &mut m[i * de..(i + 1) * de];
            for (k, &wk) in w.iter().enumerate() {
                let base = (i * dr + k) * de;
                let core = &self.core_tensor[base..base + de];
                for (mj, &c) in row.iter_mut().zip(core) {
                    *mj += wk * c;
                }
            }
        }
        m
    }

    fn check_shapes(&self) -> Result<()> {
        if self.entity_dim == 0 || self.relation_dim == 0 {
            return Err(Error::InvalidConfig("embedding dimensions must be >= 1".into()));
        }
        let ok = self.entity_vectors.len() == self.num_entities * self.entity_dim
            && self.relation_vectors.len() == self.num_relations * self.relation_dim
            && self.core_tensor.len() == self.entity_dim * self.relation_dim * self.entity_dim;
        if !ok {
            return Err(Error::Checkpoint("parameter array lengths do not match dimensions".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredTriple {
    pub triple: Triple,
    pub raw_score: f64,
    pub plausibility: f64,
}

/// Trained embedding plus per-relation classification thresholds.
#[derive(Clone, Debug)]
pub struct EmbeddingModel {
    params: Parameters,
    thresholds: Vec<f64>,
    global_threshold: f64,
    seed: u64,
    operators: Vec<f64>,
}

impl PartialEq for EmbeddingModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.thresholds == other.thresholds
            && self.global_threshold == other.global_threshold
            && self.seed == other.seed
    }
}

impl EmbeddingModel {
    /// Wrap parameters; thresholds start at 0 for every relation.
    pub fn from_parameters(params: Parameters, seed: u64) -> Result<Self> {
        params.check_shapes()?;
        let nr = params.num_relations;
        let mut m =
            EmbeddingModel { params, thresholds: vec![0.0; nr], global_threshold: 0.0, seed, operators: Vec::new() };
        m.refresh_operators();
        Ok(m)
    }

    /// One-hot model whose raw score for `(h, r, t)` is exactly `table(h, r, t)`.
    /// Handy for fixtures where scores are chosen by hand.
    pub fn from_score_table(num_entities: usize, num_relations: usize, table: impl Fn(Triple) -> f64) -> Self {
        let mut p = Parameters::zeros(num_entities, num_relations, num_entities.max(1), num_relations.max(1));
        for e in 0..num_entities {
            p.entity_vectors[e * p.entity_dim + e] = 1.0;
        }
        for r in 0..num_relations {
            p.relation_vectors[r * p.relation_dim + r] = 1.0;
        }
        for h in 0..num_entities {
            for r in 0..num_relations {
                for t in 0..num_entities {
                    let idx = (h * p.relation_dim + r) * p.entity_dim + t;
                    p.core_tensor[idx] =
                        table(Triple::new(EntityId(h as u32), RelationId(r as u32), EntityId(t as u32)));
                }
            }
        }
        Self::from_parameters(p, 0).expect("shapes are consistent by construction")
    }

    pub(crate) fn refresh_operators(&mut self) {
        let mut ops = Vec::with_capacity(self.params.num_relations * self.params.entity_dim.pow(2));
        for r in 0..self.params.num_relations {
            ops.extend(self.params.relation_operator(RelationId(r as u32)));
        }
        self.operators = ops;
    }

    pub fn parameters(&self) -> &Parameters {
        &self.params
    }

    pub fn num_entities(&self) -> usize {
        self.params.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.params.num_relations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn global_threshold(&self) -> f64 {
        self.global_threshold
    }

    pub fn threshold(&self, r: RelationId) -> f64 {
        self.thresholds[r.index()]
    }

    pub fn set_thresholds(&mut self, calibration: &Calibration) {
        assert_eq!(calibration.thresholds.len(), self.thresholds.len());
        self.thresholds = calibration.thresholds.clone();
        self.global_threshold = calibration.global;
    }

    pub fn set_threshold(&mut self, r: RelationId, tau: f64) {
        self.thresholds[r.index()] = tau;
    }

    fn operator(&self, r: RelationId) -> &[f64] {
        let n = self.params.entity_dim * self.params.entity_dim;
        &self.operators[r.index() * n..(r.index() + 1) * n]
    }

    fn check(&self, t: &Triple) -> Result<()> {
        let ne = self.num_entities();
        for e in [t.head, t.tail] {
            if e.index() >= ne {
                return Err(Error::OutOfRange { kind: "entity", id: e.index(), size: ne });
            }
        }
        if t.relation.index() >= self.num_relations() {
            return Err(Error::OutOfRange { kind: "relation", id: t.relation.index(), size: self.num_relations() });
        }
        Ok(())
    }

    /// `v_hᵀ M_r`, the vector every tail is dotted with.
    pub fn head_projection(&self, h: EntityId, r: RelationId) -> Vec<f64> {
        let de = self.params.entity_dim;
        let m = self.operator(r);
        let vh = self.params.entity(h);
        let mut u = vec![0.0; de];
        for (i, &hi) in vh.iter().enumerate() {
            if hi == 0.0 {
                continue;
            }
            for (uj, &mij) in u.iter_mut().zip(&m[i * de..(i + 1) * de]) {
                *uj += hi * mij;
            }
        }
        u
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Unchecked raw score; panics on out-of-range ids.
    pub fn raw_score(&self, t: &Triple) -> f64 {
        let u = self.head_projection(t.head, t.relation);
        Self::dot(&u, self.params.entity(t.tail))
    }

    pub fn score(&self, t: &Triple) -> Result<ScoredTriple> {
        self.check(t)?;
        let raw = self.raw_score(t);
        Ok(ScoredTriple { triple: *t, raw_score: raw, plausibility: logistic(raw) })
    }

    pub fn plausibility(&self, t: &Triple) -> f64 {
        logistic(self.raw_score(t))
    }

    /// Raw scores of `(h, r, e)` for every entity `e`.
    pub fn score_tails(&self, h: EntityId, r: RelationId) -> Vec<f64> {
        let u = self.head_projection(h, r);
        (0..self.num_entities()).map(|e| Self::dot(&u, self.params.entity(EntityId(e as u32)))).collect()
    }

    /// Raw scores of `(e, r, t)` for every entity `e`.
    pub fn score_heads(&self, r: RelationId, t: EntityId) -> Vec<f64> {
        let vt = self.params.entity(t);
        (0..self.num_entities()).map(|e| Self::dot(&self.head_projection(EntityId(e as u32), r), vt)).collect()
    }

    pub fn classify(&self, t: &Triple) -> Result<bool> {
        Ok(self.score(t)?.raw_score >= self.threshold(t.relation))
    }

    /// Unchecked variant of [`classify`](Self::classify).
    pub fn is_true(&self, t: &Triple) -> bool {
        self.raw_score(t) >= self.threshold(t.relation)
    }

    /// Cosine similarity between two entity vectors; `-1` when either has zero norm.
    pub fn cosine(&self, a: EntityId, b: EntityId) -> f64 {
        cosine(self.params.entity(a), self.params.entity(b))
    }

    /// Top-`k` entities by cosine similarity to `e`, excluding `e`; ties by index.
    pub fn nearest_neighbors(&self, e: EntityId, k: usize) -> Result<Vec<EntityId>> {
        let n = self.num_entities();
        if e.index() >= n {
            return Err(Error::OutOfRange { kind: "entity", id: e.index(), size: n });
        }
        if k >= n {
            return Err(Error::InvalidConfig(format!(
                "nearest neighbor count {k} must be smaller than the entity count {n}"
            )));
        }
        let mut sims: Vec<(f64, u32)> =
            (0..n as u32).filter(|&c| c != e.0).map(|c| (self.cosine(e, EntityId(c)), c)).collect();
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(sims.into_iter().take(k).map(|(_, c)| EntityId(c)).collect())
    }

    /// Full `|E| × |E|` cosine similarity matrix, row-major.
    pub fn similarity_matrix(&self) -> Vec<f64> {
        let n = self.num_entities();
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let s = self.cosine(EntityId(a as u32), EntityId(b as u32));
                out[a * n + b] = s;
                out[b * n + a] = s;
            }
        }
        out
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return -1.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}
