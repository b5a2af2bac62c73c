use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RelationPool, SurrogateConfig, Surrogates};
use crate::error::{Error, Result};
use crate::kg::{DatasetSplits, RelationId, SplitKind, Triple};
use crate::kge::{generate_negatives, EmbeddingModel};
use crate::sfe::AugmentedGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMode {
    LocalDt,
    GlobalDt,
    GlobalLr,
}

impl SurrogateMode {
    pub const ALL: [SurrogateMode; 3] = [SurrogateMode::LocalDt, SurrogateMode::GlobalDt, SurrogateMode::GlobalLr];

    pub fn name(self) -> &'static str {
        match self {
            SurrogateMode::LocalDt => "local_dt",
            SurrogateMode::GlobalDt => "global_dt",
            SurrogateMode::GlobalLr => "global_lr",
        }
    }
}

impl fmt::Display for SurrogateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurrogateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SurrogateMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown surrogate mode {s:?}")))
    }
}

/// Counts with the model's classification as ground truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, truth: bool) {
        match (predicted, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.n())
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.tp, self.fp, self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub n: usize,
}

impl From<Confusion> for FoldReport {
    fn from(c: Confusion) -> Self {
        FoldReport { f1: c.f1(), precision: c.precision(), recall: c.recall(), accuracy: c.accuracy(), n: c.n() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub mode: SurrogateMode,
    pub folds: Vec<FoldReport>,
    pub mean_f1: f64,
    /// Sample standard deviation across folds (0 for a single fold).
    pub std_f1: f64,
}

impl FidelityReport {
    pub fn from_folds(mode: SurrogateMode, folds: Vec<FoldReport>) -> Self {
        let n = folds.len() as f64;
        let mean = folds.iter().map(|f| f.f1).sum::<f64>() / n;
        let std = if folds.len() > 1 {
            (folds.iter().map(|f| (f.f1 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        FidelityReport { mode, folds, mean_f1: mean, std_f1: std }
    }
}

/// F1-fidelity of one surrogate mode against the model's classifications.
pub fn evaluate_fidelity(
    mode: SurrogateMode,
    splits: &DatasetSplits,
    m: &EmbeddingModel,
    g: &AugmentedGraph,
    cfg: &SurrogateConfig,
) -> Result<FidelityReport> {
    Ok(evaluate_fidelity_modes(&[mode], splits, m, g, cfg)?.remove(0))
}

/// F1-fidelity of several modes over shared folds and pools.
///
/// Each fold pairs the test positives with freshly sampled corruptions;
/// the surrogate pools exclude every evaluation triple of every fold.
pub fn evaluate_fidelity_modes(
    modes: &[SurrogateMode],
    splits: &DatasetSplits,
    m: &EmbeddingModel,
    g: &AugmentedGraph,
    cfg: &SurrogateConfig,
) -> Result<Vec<FidelityReport>> {
    cfg.validate()?;
    let positives: Vec<Triple> = splits.positives(SplitKind::Test).collect();
    if positives.is_empty() {
        return Err(Error::EmptyTestSplit);
    }
    let known = splits.all_positives();
    let folds: Vec<Vec<Triple>> = (0..cfg.folds as u64)
        .map(|f| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(f));
            let negs = generate_negatives(&positives, m.num_entities(), &known, cfg.neg_ratio_eval, &mut rng);
            positives.iter().copied().chain(negs).collect()
        })
        .collect();
    let mut unique: Vec<Triple> = folds.iter().flatten().copied().collect::<HashSet<_>>().into_iter().collect();
    unique.sort();
    let exclude: HashSet<Triple> = unique.iter().copied().collect();

    let s = Surrogates::new(m, g, cfg.clone());
    let relations: Vec<RelationId> =
        unique.iter().map(|t| t.relation).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let pools: BTreeMap<RelationId, RelationPool> = relations
        .into_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(r.0 as u64 + 1)));
            (r, s.build_pool(r, &exclude, &mut rng))
        })
        .collect();
    let rows: HashMap<Triple, Vec<u32>> = unique.par_iter().map(|q| (*q, s.row(&pools[&q.relation], q))).collect();
    let truth: HashMap<Triple, bool> = unique.iter().map(|q| (*q, m.is_true(q))).collect();

    let mut reports = Vec::with_capacity(modes.len());
    for &mode in modes {
        let predicted: HashMap<Triple, bool> = unique
            .par_iter()
            .map(|q| {
                let pool = &pools[&q.relation];
                let row = &rows[q];
                let y = if pool.is_empty() {
                    false
                } else {
                    match mode {
                        SurrogateMode::LocalDt => s.fit_local(q, pool).map(|l| l.tree.predict(row)).unwrap_or(false),
                        SurrogateMode::GlobalDt => pool.global_tree(&s).predict(row),
                        SurrogateMode::GlobalLr => pool.global_linear(&s).predict(row),
                    }
                };
                (*q, y)
            })
            .collect();
        let fold_reports = folds
            .iter()
            .map(|fold| {
                let mut c = Confusion::default();
                for q in fold {
                    c.add(predicted[q], truth[q]);
                }
                FoldReport::from(c)
            })
            .collect();
        reports.push(FidelityReport::from_folds(mode, fold_reports));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_arithmetic() {
        assert!((f1_score(8, 1, 1) - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(f1_score(0, 0, 0), 0.0);
        assert_eq!(f1_score(0, 3, 2), 0.0);
        let mut c = Confusion::default();
        for (p, y) in [(true, true), (false, false), (true, true)] {
            c.add(p, y);
        }
        assert_eq!(c.f1(), 1.0);
        assert_eq!(c.accuracy(), 1.0);
    }

    #[test]
    fn report_statistics() {
        let fold = |f1| FoldReport { f1, precision: 0.0, recall: 0.0, accuracy: 0.0, n: 1 };
        let r = FidelityReport::from_folds(SurrogateMode::GlobalDt, vec![fold(0.8), fold(1.0)]);
        assert!((r.mean_f1 - 0.9).abs() < 1e-12);
        assert!((r.std_f1 - 0.02f64.sqrt()).abs() < 1e-12);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["mode"], "global_dt");
        assert!(json["folds"][0]["f1"].is_number());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in SurrogateMode::ALL {
            assert_eq!(m.name().parse::<SurrogateMode>().unwrap(), m);
        }
        assert!("xke".parse::<SurrogateMode>().is_err());
    }
}
