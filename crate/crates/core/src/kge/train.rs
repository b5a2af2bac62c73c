use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{calibrate_thresholds, generate_negatives, EmbeddingModel, Parameters};
use crate::error::{Error, Result};
use crate::kg::{DatasetSplits, EntityId, LabeledTriple, RelationId, SplitKind, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub entity_dim: usize,
    pub relation_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub negative_ratio: usize,
    pub label_smoothing: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Half-width of the uniform initialization interval.
    pub init_scale: f64,
    /// L2 penalty coefficient on all parameters.
    pub l2: f64,
    /// Generated negatives per validation positive when calibrating thresholds.
    pub calibration_negatives: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            entity_dim: 64,
            relation_dim: 64,
            learning_rate: 0.05,
            epochs: 500,
            batch_size: 128,
            negative_ratio: 4,
            label_smoothing: 0.1,
            seed: 0,
            optimizer: Optimizer::Sgd,
            init_scale: 0.1,
            l2: 0.0,
            calibration_negatives: 1,
        }
    }
}

impl TrainConfig {
    /// Settings that train well on the synthetic household graph: a small
    /// core with Adam. Larger dimensions overfit the ~4k training facts.
    pub fn household() -> Self {
        TrainConfig {
            entity_dim: 12,
            relation_dim: 12,
            learning_rate: 0.003,
            epochs: 200,
            optimizer: Optimizer::Adam,
            ..TrainConfig::default()
        }
    }

    /// [`household`](Self::household) run to convergence for link
    /// prediction. Surrogates fit the shorter run slightly better.
    pub fn household_long() -> Self {
        TrainConfig { epochs: 400, ..Self::household() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.entity_dim == 0 || self.relation_dim == 0 {
            return bad("entity_dim and relation_dim must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be > 0");
        }
        if self.negative_ratio == 0 {
            return bad("negative_ratio must be >= 1");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must lie in [0, 1)");
        }
        if self.l2 < 0.0 || self.init_scale < 0.0 {
            return bad("l2 and init_scale must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean batch loss for every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean binary cross-entropy of `logistic(score)` against `targets`, plus
/// `0.5 · l2 · ‖θ‖²`, and its exact gradient with respect to every parameter.
pub fn batch_loss_and_gradient(params: &Parameters, batch: &[(Triple, f64)], l2: f64) -> (f64, Parameters) {
    let de = params.entity_dim;
    let dr = params.relation_dim;
    let mut grad = Parameters::zeros(params.num_entities, params.num_relations, de, dr);
    if batch.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / batch.len() as f64;

    let mut operators: BTreeMap<RelationId, Vec<f64>> = BTreeMap::new();
    for (t, _) in batch {
        operators.entry(t.relation).or_insert_with(|| params.relation_operator(t.relation));
    }
    // per-relation Σ g · v_h v_tᵀ
    let mut outer: BTreeMap<RelationId, Vec<f64>> = BTreeMap::new();

    let mut loss = 0.0;
    let mut mt = vec![0.0; de];
    let mut mth = vec![0.0; de];
    for &(t, y) in batch {
        let m = &operators[&t.relation];
        let vh = params.entity(t.head);
        let vt = params.entity(t.tail);
        mt.iter_mut().for_each(|x| *x = 0.0);
        mth.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..de {
            let row = &m[i * de..(i + 1) * de];
            let mut acc = 0.0;
            for j in 0..de {
                acc += row[j] * vt[j];
                mth[j] += row[j] * vh[i];
            }
            mt[i] = acc;
        }
        let s: f64 = vh.iter().zip(&mt).map(|(a, b)| a * b).sum();
        // softplus(s) - y s, computed stably
        let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
        loss += (softplus - y * s) * scale;
        let g = (super::logistic(s) - y) * scale;

        let h0 = t.head.index() * de;
        for (gi, v) in grad.entity_vectors[h0..h0 + de].iter_mut().zip(&mt) {
            *gi += g * v;
        }
        let t0 = t.tail.index() * de;
        for (gi, v) in grad.entity_vectors[t0..t0 + de].iter_mut().zip(&mth) {
            *gi += g * v;
        }
        let acc = outer.entry(t.relation).or_insert_with(|| vec![0.0; de * de]);
        for i in 0..de {
            let gh = g * vh[i];
            if gh == 0.0 {
                continue;
            }
            for (a, &x) in acc[i * de..(i + 1) * de].iter_mut().zip(vt) {
                *a += gh * x;
            }
        }
    }

    for (r, s_r) in &outer {
        let w = params.relation(*r);
        let r0 = r.index() * dr;
        for i in 0..de {
            for k in 0..dr {
                let base = (i * dr + k) * de;
                let core = &params.core_tensor[base..base + de];
                let srow = &s_r[i * de..(i + 1) * de];
                let mut dot = 0.0;
                let gcore = &mut grad.core_tensor[base..base + de];
                for j in 0..de {
                    gcore[j] += w[k] * srow[j];
                    dot += core[j] * srow[j];
                }
                grad.relation_vectors[r0 + k] += dot;
            }
        }
    }

    if l2 > 0.0 {
        let mut sq = 0.0;
        for (g, p) in [
            (&mut grad.entity_vectors, &params.entity_vectors),
            (&mut grad.relation_vectors, &params.relation_vectors),
            (&mut grad.core_tensor, &params.core_tensor),
        ] {
            for (gi, pi) in g.iter_mut().zip(p.iter()) {
                *gi += l2 * pi;
                sq += pi * pi;
            }
        }
        loss += 0.5 * l2 * sq;
    }
    (loss, grad)
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamState {
    fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

fn param_slices(p: &mut Parameters) -> [&mut Vec<f64>; 3] {
    [&mut p.entity_vectors, &mut p.relation_vectors, &mut p.core_tensor]
}

fn apply_update(params: &mut Parameters, grad: &mut Parameters, cfg: &TrainConfig, adam: &mut AdamState) {
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in param_slices(params).into_iter().zip(param_slices(grad)) {
                for (pi, gi) in p.iter_mut().zip(g.iter()) {
                    *pi -= cfg.learning_rate * gi;
                }
            }
        }
        Optimizer::Adam => {
            const B1: f64 = 0.9;
            const B2: f64 = 0.999;
            const EPS: f64 = 1e-8;
            adam.step += 1;
            let c1 = 1.0 - B1.powi(adam.step);
            let c2 = 1.0 - B2.powi(adam.step);
            let mut offset = 0;
            for (p, g) in param_slices(params).into_iter().zip(param_slices(grad)) {
                for (idx, (pi, gi)) in p.iter_mut().zip(g.iter()).enumerate() {
                    let m = &mut adam.m[offset + idx];
                    let v = &mut adam.v[offset + idx];
                    *m = B1 * *m + (1.0 - B1) * gi;
                    *v = B2 * *v + (1.0 - B2) * gi * gi;
                    *pi -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + EPS);
                }
                offset += p.len();
            }
        }
    }
}

fn initialize(ne: usize, nr: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Parameters {
    let mut p = Parameters::zeros(ne, nr, cfg.entity_dim, cfg.relation_dim);
    let s = cfg.init_scale;
    for v in param_slices(&mut p) {
        for x in v.iter_mut() {
            *x = if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
        }
    }
    p
}

/// One corrupted copy of `t` that is not a known positive, if one is found quickly.
pub(crate) fn sample_corruption(
    t: &Triple,
    num_entities: usize,
    known: &HashSet<Triple>,
    rng: &mut impl Rng,
) -> Option<Triple> {
    if num_entities < 2 {
        return None;
    }
    for _ in 0..32 {
        let e = EntityId(rng.gen_range(0..num_entities as u32));
        let c = if rng.gen_bool(0.5) { Triple { head: e, ..*t } } else { Triple { tail: e, ..*t } };
        if c != *t && !known.contains(&c) {
            return Some(c);
        }
    }
    None
}

pub fn train(splits: &DatasetSplits, cfg: &TrainConfig) -> Result<EmbeddingModel> {
    train_with_history(splits, cfg).map(|(m, _)| m)
}

/// Train with negative sampling and return the per-epoch mean loss alongside
/// the model. Thresholds are calibrated on the validation split (plus
/// generated negatives) before returning.
pub fn train_with_history(splits: &DatasetSplits, cfg: &TrainConfig) -> Result<(EmbeddingModel, TrainHistory)> {
    cfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    let ne = splits.num_entities();
    let nr = splits.num_relations();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = initialize(ne, nr, cfg, &mut rng);
    let positives: Vec<Triple> = splits.positives(SplitKind::Train).collect();
    let given_negatives: Vec<Triple> = splits.train.iter().filter(|lt| !lt.label).map(|lt| lt.triple).collect();
    let known: HashSet<Triple> = positives.iter().copied().collect();
    let pos_target = 1.0 - cfg.label_smoothing / 2.0;
    let neg_target = cfg.label_smoothing / 2.0;
    let total = params.entity_vectors.len() + params.relation_vectors.len() + params.core_tensor.len();
    let mut adam = AdamState::new(total);
    let mut history = TrainHistory::default();

    let mut examples: Vec<(Triple, f64)> = Vec::new();
    for epoch in 0..cfg.epochs {
        examples.clear();
        for t in &positives {
            examples.push((*t, pos_target));
            for _ in 0..cfg.negative_ratio {
                if let Some(c) = sample_corruption(t, ne, &known, &mut rng) {
                    examples.push((c, neg_target));
                }
            }
        }
        examples.extend(given_negatives.iter().map(|t| (*t, neg_target)));
        examples.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in examples.chunks(cfg.batch_size) {
            let (loss, mut grad) = batch_loss_and_gradient(&params, batch, cfg.l2);
            apply_update(&mut params, &mut grad, cfg, &mut adam);
            epoch_loss += loss;
            batches += 1;
        }
        if !params.all_finite() || !epoch_loss.is_finite() {
            return Err(Error::NonFinite { epoch: epoch + 1 });
        }
        let mean = epoch_loss / batches as f64;
        if epoch % 50 == 0 {
            debug!(epoch, loss = mean, "training");
        }
        history.epoch_losses.push(mean);
    }

    let mut model = EmbeddingModel::from_parameters(params, cfg.seed)?;
    let calibration_set = calibration_examples(splits, cfg, &mut rng);
    let calibration = calibrate_thresholds(&model, &calibration_set);
    model.set_thresholds(&calibration);
    Ok((model, history))
}

fn calibration_examples(splits: &DatasetSplits, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<LabeledTriple> {
    let source = if splits.valid.is_empty() { &splits.train } else { &splits.valid };
    let known = splits.all_positives();
    let mut out: Vec<LabeledTriple> = source.to_vec();
    let pos: Vec<Triple> = source.iter().filter(|lt| lt.label).map(|lt| lt.triple).collect();
    out.extend(
        generate_negatives(&pos, splits.num_entities(), &known, cfg.calibration_negatives, rng)
            .into_iter()
            .map(LabeledTriple::negative),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{RelationId, Vocabulary};
    use std::sync::Arc;

    fn random_params(seed: u64, ne: usize, nr: usize, d: usize) -> Parameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Parameters::zeros(ne, nr, d, d);
        for v in param_slices(&mut p) {
            for x in v.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
        }
        p
    }

    #[test]
    fn gradient_matches_central_differences() {
        let params = random_params(3, 4, 2, 3);
        let batch = vec![
            (Triple::new(EntityId(0), RelationId(0), EntityId(1)), 0.95),
            (Triple::new(EntityId(2), RelationId(1), EntityId(2)), 0.05),
            (Triple::new(EntityId(3), RelationId(0), EntityId(0)), 0.05),
            (Triple::new(EntityId(0), RelationId(1), EntityId(3)), 0.95),
        ];
        let l2 = 0.01;
        let (_, grad) = batch_loss_and_gradient(&params, &batch, l2);
        let eps = 1e-6;
        let mut p = params.clone();
        let mut grads = grad.clone();
        for (which, (pv, gv)) in param_slices(&mut p).into_iter().zip(param_slices(&mut grads)).enumerate() {
            for idx in 0..pv.len() {
                let orig = pv[idx];
                pv[idx] = orig + eps;
                let snapshot = |v: &Vec<f64>| {
                    let mut q = params.clone();
                    *param_slices(&mut q)[which] = v.clone();
                    batch_loss_and_gradient(&q, &batch, l2).0
                };
                let up = snapshot(pv);
                pv[idx] = orig - eps;
                let down = snapshot(pv);
                pv[idx] = orig;
                let fd = (up - down) / (2.0 * eps);
                let an = gv[idx];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel <= 1e-4, "param {which}[{idx}] fd={fd} analytic={an}");
            }
        }
    }

    #[test]
    fn empty_train_split_is_rejected() {
        let splits =
            DatasetSplits { vocab: Arc::new(Vocabulary::default()), train: vec![], valid: vec![], test: vec![] };
        assert!(matches!(train(&splits, &TrainConfig::default()), Err(Error::EmptyTrainSplit)));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = TrainConfig { label_smoothing: 1.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn diverging_training_reports_epoch() {
        let vocab = Arc::new(Vocabulary {
            entities: ["a", "b", "c"].iter().map(|s| s.to_string()).collect(),
            relations: ["r"].iter().map(|s| s.to_string()).collect(),
        });
        let splits = DatasetSplits {
            vocab,
            train: vec![LabeledTriple::positive(Triple::new(EntityId(0), RelationId(0), EntityId(1)))],
            valid: vec![],
            test: vec![],
        };
        let cfg = TrainConfig {
            entity_dim: 2,
            relation_dim: 2,
            learning_rate: 1e200,
            epochs: 5,
            init_scale: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&splits, &cfg), Err(Error::NonFinite { .. })));
    }
}
