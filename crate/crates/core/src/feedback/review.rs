//! Picking inferences worth a human look and laying out their hops for
//! review.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{propose_options, CorrectionOption};
use crate::error::{Error, Result};
use crate::explain::{explain, ExplainConfig, Explanation, GroundedPath, TemplateSet};
use crate::kg::{DatasetSplits, LabeledTriple, Position, RelationId, SplitKind, Triple};
use crate::kge::{generate_negatives, EmbeddingModel};
use crate::sfe::{AugmentedGraph, Direction};
use crate::surrogate::{SurrogateConfig, Surrogates};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuspectConfig {
    /// Misclassified test facts to explain.
    pub max_explanations: usize,
    pub seed: u64,
    pub surrogate: SurrogateConfig,
    pub explain: ExplainConfig,
}

impl Default for SuspectConfig {
    fn default() -> Self {
        SuspectConfig {
            max_explanations: 20,
            seed: 0,
            surrogate: SurrogateConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuspectReport {
    /// Test facts (positives plus one corruption each) the model gets wrong.
    pub misclassified: usize,
    /// Sampled facts skipped because the surrogate disagreed with the model.
    pub disagreements: usize,
    /// In sampling order.
    pub explanations: Vec<Explanation>,
}

/// Explain a seeded sample of the test facts that `m` misclassifies,
/// judged against `reference` (usually the clean data).
pub fn explain_suspects(
    reference: &DatasetSplits,
    m: &EmbeddingModel,
    g: &AugmentedGraph,
    templates: &TemplateSet,
    cfg: &SuspectConfig,
) -> Result<SuspectReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let positives: Vec<Triple> = reference.positives(SplitKind::Test).collect();
    let negatives = generate_negatives(&positives, m.num_entities(), &reference.all_positives(), 1, &mut rng);
    let mut wrong: Vec<LabeledTriple> = positives
        .into_iter()
        .map(LabeledTriple::positive)
        .chain(negatives.into_iter().map(LabeledTriple::negative))
        .filter(|lt| m.is_true(&lt.triple) != lt.label)
        .collect();
    let misclassified = wrong.len();
    wrong.shuffle(&mut rng);
    wrong.truncate(cfg.max_explanations);

    let queries: HashSet<Triple> = wrong.iter().map(|lt| lt.triple).collect();
    let mut by_rel: BTreeMap<RelationId, Vec<(usize, Triple)>> = BTreeMap::new();
    for (i, lt) in wrong.iter().enumerate() {
        by_rel.entry(lt.triple.relation).or_default().push((i, lt.triple));
    }
    let s = Surrogates::new(m, g, cfg.surrogate.clone());
    let mut outcomes: Vec<(usize, Option<Explanation>)> = by_rel
        .par_iter()
        .map(|(r, qs)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (r.0 as u64 + 1).wrapping_mul(0x2545_f491_4f6c_dd1d));
            let pool = s.build_pool(*r, &queries, &mut rng);
            qs.iter()
                .map(|&(i, q)| {
                    let local = s.fit_local(&q, &pool)?;
                    let row = s.row(&pool, &q);
                    match explain(&q, m, &local, &row, g, templates, &cfg.explain) {
                        Ok(x) => Ok((i, Some(x))),
                        Err(Error::Disagreement { .. }) => Ok((i, None)),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    outcomes.sort_by_key(|(i, _)| *i);
    let disagreements = outcomes.iter().filter(|(_, x)| x.is_none()).count();
    Ok(SuspectReport {
        misclassified,
        disagreements,
        explanations: outcomes.into_iter().filter_map(|(_, x)| x).collect(),
    })
}

/// The slot a reviewer may swap on hop `i` of `path`: the intermediate
/// entity the grounding chose. The entering side for the last hop, the
/// tail for a one-hop path.
pub fn review_slot(path: &GroundedPath, i: usize) -> Position {
    let hop = &path.hops[i];
    let n = path.hops.len();
    let vary_to = if n == 1 { return Position::Tail } else { i + 1 < n };
    match (hop.direction, vary_to) {
        (Direction::Forward, true) | (Direction::Inverse, false) => Position::Tail,
        (Direction::Forward, false) | (Direction::Inverse, true) => Position::Head,
    }
}

/// One reviewable fact of an explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewHop {
    pub fact: Triple,
    pub slot: Position,
    pub options: Vec<CorrectionOption>,
}

/// Distinct hop facts of `x` in path order, each with its options.
pub fn review_hops(x: &Explanation, m: &EmbeddingModel) -> Result<Vec<ReviewHop>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in &x.grounded_paths {
        for (i, hop) in p.hops.iter().enumerate() {
            if seen.insert(hop.fact) {
                let slot = review_slot(p, i);
                out.push(ReviewHop { fact: hop.fact, slot, options: propose_options(&hop.fact, m, slot)? });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::GroundedHop;
    use crate::kg::{EntityId, RelationId};

    fn hop(h: u32, t: u32, direction: Direction) -> GroundedHop {
        GroundedHop { fact: Triple::new(EntityId(h), RelationId(0), EntityId(t)), direction, plausibility: 0.9 }
    }

    fn path(hops: Vec<GroundedHop>) -> GroundedPath {
        GroundedPath {
            query: Triple::new(EntityId(0), RelationId(1), EntityId(9)),
            relation_path: crate::sfe::RelationPath::new(vec![crate::sfe::DirectedRelationStep::forward(RelationId(
                0,
            ))]),
            belief: 0.9,
            hops,
        }
    }

    #[test]
    fn slots_follow_the_intermediates() {
        // 0 -> 5 (forward), 5 <- 9 read backwards (inverse of 9 -> 5).
        let p = path(vec![hop(0, 5, Direction::Forward), hop(9, 5, Direction::Inverse)]);
        assert_eq!(review_slot(&p, 0), Position::Tail);
        // Leaves from 5, which is the tail of (9, r, 5).
        assert_eq!(review_slot(&p, 1), Position::Tail);
        let p = path(vec![hop(5, 0, Direction::Inverse), hop(5, 9, Direction::Forward)]);
        assert_eq!(review_slot(&p, 0), Position::Head);
        assert_eq!(review_slot(&p, 1), Position::Head);
        assert_eq!(review_slot(&path(vec![hop(0, 9, Direction::Forward)]), 0), Position::Tail);
    }

    #[test]
    fn review_hops_are_distinct_with_five_options() {
        let m = EmbeddingModel::from_score_table(10, 2, |t| (t.head.0 + 2 * t.tail.0) as f64);
        let shared = hop(0, 5, Direction::Forward);
        let x = Explanation {
            query: Triple::new(EntityId(0), RelationId(1), EntityId(9)),
            predicted: true,
            grounded_paths: vec![
                path(vec![shared, hop(5, 9, Direction::Forward)]),
                path(vec![shared, hop(9, 5, Direction::Inverse)]),
            ],
            text: String::new(),
            template_version: String::new(),
        };
        let hops = review_hops(&x, &m).unwrap();
        assert_eq!(hops.len(), 3);
        for h in &hops {
            assert_eq!(h.options.len(), super::super::NUM_OPTIONS);
            assert_eq!(h.options[0], CorrectionOption::Fact(h.fact));
        }
        // Last hop 5 -> 9 varies the entering entity 5, a head.
        assert_eq!(hops[1].slot, Position::Head);
        assert_eq!(hops[1].options[1], CorrectionOption::Fact(Triple::new(EntityId(9), RelationId(0), EntityId(9))));
    }
}
