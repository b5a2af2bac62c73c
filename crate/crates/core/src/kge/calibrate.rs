use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::train::sample_corruption;
use super::EmbeddingModel;
use crate::kg::{LabeledTriple, RelationId, Triple};

/// Per-relation decision thresholds on the raw score scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub thresholds: Vec<f64>,
    pub global: f64,
    /// Relations whose calibration set lacked one of the classes; these use `global`.
    pub fallback: Vec<RelationId>,
}

/// `ratio` corruptions of each triple, never a member of `known`.
pub fn generate_negatives(
    triples: &[Triple],
    num_entities: usize,
    known: &HashSet<Triple>,
    ratio: usize,
    rng: &mut impl Rng,
) -> Vec<Triple> {
    let mut out = Vec::with_capacity(triples.len() * ratio);
    for t in triples {
        for _ in 0..ratio {
            if let Some(c) = sample_corruption(t, num_entities, known, rng) {
                out.push(c);
            }
        }
    }
    out
}

/// Accuracy-maximizing threshold over `(score, label)` pairs.
///
/// Candidates sit at midpoints between adjacent distinct scores, plus one
/// below the minimum and one above the maximum. When several candidates
/// reach the best accuracy the middle one of them is returned. `None` when
/// either class is missing.
pub(crate) fn best_threshold(samples: &[(f64, bool)]) -> Option<f64> {
    let pos = samples.iter().filter(|s| s.1).count();
    let neg = samples.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Threshold below everything: all predicted true.
    let mut correct = pos as i64;
    let mut candidates: Vec<(f64, i64)> = vec![(sorted[0].0 - 1.0, correct)];
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].0;
        // Move every sample with this score to the "predicted false" side.
        while i < sorted.len() && sorted[i].0 == s {
            correct += if sorted[i].1 { -1 } else { 1 };
            i += 1;
        }
        let tau = if i < sorted.len() { (s + sorted[i].0) / 2.0 } else { s + 1.0 };
        candidates.push((tau, correct));
    }
    let best = candidates.iter().map(|c| c.1).max()?;
    let tied: Vec<f64> = candidates.iter().filter(|c| c.1 == best).map(|c| c.0).collect();
    Some(tied[(tied.len() - 1) / 2])
}

/// Choose per-relation thresholds maximizing classification accuracy on a
/// labeled calibration set. Relations with a single-class calibration set
/// fall back to the pooled threshold and a warning is logged.
pub fn calibrate_thresholds(m: &EmbeddingModel, examples: &[LabeledTriple]) -> Calibration {
    let nr = m.num_relations();
    let mut per_rel: Vec<Vec<(f64, bool)>> = vec![Vec::new(); nr];
    for lt in examples {
        per_rel[lt.triple.relation.index()].push((m.raw_score(&lt.triple), lt.label));
    }
    let pooled: Vec<(f64, bool)> = per_rel.iter().flatten().copied().collect();
    let global = best_threshold(&pooled).unwrap_or(0.0);
    let mut thresholds = Vec::with_capacity(nr);
    let mut fallback = Vec::new();
    for (r, samples) in per_rel.iter().enumerate() {
        match best_threshold(samples) {
            Some(tau) => thresholds.push(tau),
            None => {
                warn!(relation = r, "single-class calibration set; using the global threshold");
                fallback.push(RelationId(r as u32));
                thresholds.push(global);
            }
        }
    }
    Calibration { thresholds, global, fallback }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityId;
    use proptest::prelude::*;

    fn accuracy(samples: &[(f64, bool)], tau: f64) -> usize {
        samples.iter().filter(|(s, y)| (*s >= tau) == *y).count()
    }

    #[test]
    fn separable_scores_pick_the_midpoint() {
        let s = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        let tau = best_threshold(&s).unwrap();
        assert!((tau - 0.5).abs() < 1e-12);
        assert_eq!(accuracy(&s, tau), 4);
    }

    #[test]
    fn single_class_sets_fall_back_to_global() {
        let m = EmbeddingModel::from_score_table(3, 2, |t| t.tail.0 as f64 - t.head.0 as f64);
        let t = |h, r, tl| Triple::new(EntityId(h), RelationId(r), EntityId(tl));
        let examples = vec![
            LabeledTriple::positive(t(0, 0, 2)),
            LabeledTriple::negative(t(2, 0, 0)),
            LabeledTriple::positive(t(0, 1, 1)),
            LabeledTriple::positive(t(1, 1, 2)),
        ];
        let c = calibrate_thresholds(&m, &examples);
        assert_eq!(c.fallback, vec![RelationId(1)]);
        assert_eq!(c.thresholds[1], c.global);
        assert_eq!(c.thresholds[0], 0.0);
    }

    proptest! {
        #[test]
        fn scan_matches_grid_sweep(samples in prop::collection::vec((0u32..1000, any::<bool>()), 2..40)) {
            let samples: Vec<(f64, bool)> = samples.into_iter().map(|(s, y)| (s as f64 / 1000.0, y)).collect();
            prop_assume!(samples.iter().any(|s| s.1) && samples.iter().any(|s| !s.1));
            let tau = best_threshold(&samples).unwrap();
            // Scores live on a 1e-3 lattice, so a grid offset by half a step
            // visits every distinct classification.
            let grid_best = (-1..=1001)
                .map(|i| accuracy(&samples, (i as f64 + 0.5) / 1000.0))
                .max()
                .unwrap();
            prop_assert_eq!(accuracy(&samples, tau), grid_best);
        }
    }
}
