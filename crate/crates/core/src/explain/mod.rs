//! Grounded, templated explanations of single inferences.

mod ground;
mod templates;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Triple, Vocabulary};
use crate::kge::EmbeddingModel;
use crate::sfe::{AugmentedGraph, Direction, RelationPath};
use crate::surrogate::{classify_surrogate, LocalTreeModel};

pub use ground::{ground_path, GroundedHop, GroundedPath, GroundingConfig, DEFAULT_BEAM};
pub use templates::{indefinite_article, join_clauses, render_fact, Phrases, RelationTemplate, TemplateSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Decision-path features grounded per explanation.
    pub n_paths: usize,
    /// Best groundings kept for each relation path.
    pub groundings_per_path: usize,
    pub grounding: GroundingConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { n_paths: 3, groundings_per_path: 1, grounding: GroundingConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub query: Triple,
    pub predicted: bool,
    /// Belief descending.
    pub grounded_paths: Vec<GroundedPath>,
    pub text: String,
    pub template_version: String,
}

/// Explain the model's verdict on `q` through the local tree's decision path.
///
/// Only features tested present on the route are grounded; a feature tested
/// absent asserts that no such chain exists, so there is nothing to show.
pub fn explain(
    q: &Triple,
    m: &EmbeddingModel,
    local: &LocalTreeModel,
    row: &[u32],
    g: &AugmentedGraph,
    templates: &TemplateSet,
    cfg: &ExplainConfig,
) -> Result<Explanation> {
    let (surrogate, route) = classify_surrogate(local, row)?;
    let embedding = m.classify(q)?;
    if surrogate != embedding {
        return Err(Error::Disagreement { surrogate, embedding });
    }
    let paths: Vec<&RelationPath> =
        route.iter().filter(|t| t.present).take(cfg.n_paths).map(|t| &local.vocabulary[t.feature as usize]).collect();
    let mut grounded: Vec<GroundedPath> = paths
        .par_iter()
        .flat_map_iter(|p| {
            let mut v = ground_path(q, p, m, g, &cfg.grounding);
            v.truncate(cfg.groundings_per_path);
            v
        })
        .collect();
    grounded.sort_by(ground::by_belief);
    let text = render_explanation(q, embedding, &grounded, templates, g.vocab())?;
    Ok(Explanation {
        query: *q,
        predicted: embedding,
        grounded_paths: grounded,
        text,
        template_version: templates.version.clone(),
    })
}

/// An explanation of `q` whose chains are the single facts `facts`, each
/// taken forward. Used to put arbitrary facts in front of a reviewer.
pub fn explanation_from_facts(
    q: &Triple,
    facts: &[Triple],
    m: &EmbeddingModel,
    templates: &TemplateSet,
    vocab: &Vocabulary,
) -> Result<Explanation> {
    let predicted = m.classify(q)?;
    let grounded: Vec<GroundedPath> = facts
        .iter()
        .map(|f| {
            let plausibility = m.plausibility(f);
            GroundedPath {
                query: *q,
                relation_path: RelationPath::new(vec![crate::sfe::DirectedRelationStep::forward(f.relation)]),
                hops: vec![GroundedHop { fact: *f, direction: Direction::Forward, plausibility }],
                belief: plausibility,
            }
        })
        .collect();
    let text = render_explanation(q, predicted, &grounded, templates, vocab)?;
    Ok(Explanation {
        query: *q,
        predicted,
        grounded_paths: grounded,
        text,
        template_version: templates.version.clone(),
    })
}

/// One sentence per chain, then the conclusion about `q`.
pub fn render_explanation(
    q: &Triple,
    predicted: bool,
    paths: &[GroundedPath],
    templates: &TemplateSet,
    vocab: &Vocabulary,
) -> Result<String> {
    let ph = &templates.phrases;
    let claim = templates.render_fact(q, Direction::Forward, vocab)?;
    if paths.is_empty() {
        let lead = if predicted { &ph.fallback_true } else { &ph.fallback_false };
        return Ok(format!("{lead} {claim}."));
    }
    let mut sentences = Vec::with_capacity(paths.len() + 1);
    for (i, p) in paths.iter().enumerate() {
        let clauses =
            p.hops.iter().map(|h| templates.render_fact(&h.fact, h.direction, vocab)).collect::<Result<Vec<_>>>()?;
        let lead = if i == 0 { &ph.opening } else { &ph.additional };
        sentences.push(format!("{lead} {}.", join_clauses(&clauses)));
    }
    let lead = if predicted { &ph.conclusion_true } else { &ph.conclusion_false };
    sentences.push(format!("{lead} {claim}."));
    Ok(sentences.join(" "))
}

/// Name-level triple as it appears in JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedTriple {
    pub h: String,
    pub r: String,
    pub t: String,
}

impl NamedTriple {
    pub fn new(t: &Triple, vocab: &Vocabulary) -> Self {
        NamedTriple {
            h: vocab.entity_name(t.head).to_string(),
            r: vocab.relation_name(t.relation).to_string(),
            t: vocab.entity_name(t.tail).to_string(),
        }
    }

    pub fn resolve(&self, vocab: &Vocabulary) -> Result<Triple> {
        Ok(Triple::new(vocab.entity(&self.h)?, vocab.relation(&self.r)?, vocab.entity(&self.t)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopRecord {
    pub h: String,
    pub r: String,
    pub t: String,
    pub plausibility: f64,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub steps: Vec<String>,
    pub hops: Vec<HopRecord>,
    pub belief: f64,
}

/// The JSON form of an [`Explanation`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub query: NamedTriple,
    pub predicted: bool,
    pub paths: Vec<PathRecord>,
    pub text: String,
    pub template_version: String,
}

impl Explanation {
    pub fn record(&self, vocab: &Vocabulary) -> ExplanationRecord {
        ExplanationRecord {
            query: NamedTriple::new(&self.query, vocab),
            predicted: self.predicted,
            paths: self
                .grounded_paths
                .iter()
                .map(|p| PathRecord {
                    steps: p.relation_path.label(vocab).to_string().split('/').map(str::to_string).collect(),
                    hops: p
                        .hops
                        .iter()
                        .map(|h| {
                            let n = NamedTriple::new(&h.fact, vocab);
                            HopRecord { h: n.h, r: n.r, t: n.t, plausibility: h.plausibility, direction: h.direction }
                        })
                        .collect(),
                    belief: p.belief,
                })
                .collect(),
            text: self.text.clone(),
            template_version: self.template_version.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KnowledgeGraph, RelationId};
    use crate::sfe::DirectedRelationStep;
    use crate::surrogate::{DecisionTree, Node};
    use std::collections::HashSet;
    use std::sync::Arc;

    const NAMES: [&str; 6] = ["cleaning_rag", "cabinet", "towel", "wipe", "scrubber", "apple"];
    const RELS: [&str; 2] = ["ObjInLoc", "ObjUsedTo"];

    struct Fixture {
        m: EmbeddingModel,
        g: AugmentedGraph,
        vocab: Arc<Vocabulary>,
    }

    fn tr(v: &Vocabulary, h: &str, r: &str, t: &str) -> Triple {
        Triple::new(v.entity(h).unwrap(), v.relation(r).unwrap(), v.entity(t).unwrap())
    }

    /// rag in cabinet, towel in cabinet, towel used to wipe; the model also
    /// believes rag used to wipe.
    fn fixture() -> Fixture {
        let vocab = Arc::new(Vocabulary {
            entities: NAMES.iter().map(|s| s.to_string()).collect(),
            relations: RELS.iter().map(|s| s.to_string()).collect(),
        });
        let facts = vec![
            tr(&vocab, "cleaning_rag", "ObjInLoc", "cabinet"),
            tr(&vocab, "towel", "ObjInLoc", "cabinet"),
            tr(&vocab, "towel", "ObjUsedTo", "wipe"),
        ];
        let mut believed: HashSet<Triple> = facts.iter().copied().collect();
        believed.insert(tr(&vocab, "cleaning_rag", "ObjUsedTo", "wipe"));
        let mut m =
            EmbeddingModel::from_score_table(
                NAMES.len(),
                RELS.len(),
                move |t| if believed.contains(&t) { 2.0 } else { -2.0 },
            );
        m.set_threshold(RelationId(0), 0.0);
        m.set_threshold(RelationId(1), 0.0);
        let g = AugmentedGraph::from_graph(&KnowledgeGraph::new(vocab.clone(), facts));
        Fixture { m, g, vocab }
    }

    fn path(v: &Vocabulary) -> RelationPath {
        let (inloc, used) = (v.relation("ObjInLoc").unwrap(), v.relation("ObjUsedTo").unwrap());
        RelationPath::new(vec![
            DirectedRelationStep::forward(inloc),
            DirectedRelationStep::inverse(inloc),
            DirectedRelationStep::forward(used),
        ])
    }

    /// Tree testing feature 0 at the root: present -> `yes`, absent -> `no`.
    fn local(q: Triple, vocabulary: Vec<RelationPath>, yes: bool, no: bool) -> LocalTreeModel {
        let leaf = |class| Node::Leaf { class, samples: 1, positives: class as usize };
        let tree = DecisionTree { nodes: vec![Node::Split { feature: 0, absent: 1, present: 2 }, leaf(no), leaf(yes)] };
        LocalTreeModel {
            query: q,
            tree,
            vocabulary: Arc::new(vocabulary),
            neighborhood_k: 1,
            fidelity_on_train: 1.0,
            cv_fidelity: 1.0,
        }
    }

    #[test]
    fn cleaning_rag_exemplar() {
        let f = fixture();
        let q = tr(&f.vocab, "cleaning_rag", "ObjUsedTo", "wipe");
        let l = local(q, vec![path(&f.vocab)], true, false);
        let e = explain(&q, &f.m, &l, &[0], &f.g, &TemplateSet::household(), &ExplainConfig::default()).unwrap();
        assert_eq!(
            e.text,
            "I know that a cleaning rag is often in a cabinet, a cabinet often can contain a towel, and a towel \
             is used to wipe. Therefore, it is possible that a cleaning rag is used to wipe."
        );
        assert!(e.predicted);
        assert_eq!(e.grounded_paths.len(), 1);
        let rec = serde_json::to_value(e.record(&f.vocab)).unwrap();
        assert_eq!(rec["query"]["h"], "cleaning_rag");
        assert_eq!(rec["paths"][0]["steps"][1], "ObjInLoc.inv");
        assert_eq!(rec["paths"][0]["hops"][1]["h"], "towel");
        assert_eq!(rec["paths"][0]["hops"][1]["direction"], "inverse");
        assert_eq!(rec["template_version"], "household-1");
    }

    #[test]
    fn disagreement_is_refused() {
        let f = fixture();
        let q = tr(&f.vocab, "cleaning_rag", "ObjUsedTo", "wipe");
        let l = local(q, vec![path(&f.vocab)], false, false);
        let err = explain(&q, &f.m, &l, &[0], &f.g, &TemplateSet::household(), &ExplainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Disagreement { surrogate: false, embedding: true }));
    }

    #[test]
    fn single_leaf_falls_back() {
        let f = fixture();
        let q = tr(&f.vocab, "cleaning_rag", "ObjUsedTo", "wipe");
        let mut l = local(q, vec![path(&f.vocab)], true, true);
        l.tree = DecisionTree::constant(true);
        let e = explain(&q, &f.m, &l, &[0], &f.g, &TemplateSet::household(), &ExplainConfig::default()).unwrap();
        assert!(e.grounded_paths.is_empty());
        assert!(e.text.starts_with("I could not find a chain of facts"));
        assert!(e.text.ends_with("it is possible that a cleaning rag is used to wipe."));
    }

    #[test]
    fn absent_branch_features_are_not_grounded() {
        let f = fixture();
        let q = tr(&f.vocab, "cleaning_rag", "ObjUsedTo", "wipe");
        let l = local(q, vec![path(&f.vocab)], false, true);
        let e = explain(&q, &f.m, &l, &[], &f.g, &TemplateSet::household(), &ExplainConfig::default()).unwrap();
        assert!(e.grounded_paths.is_empty());
    }

    #[test]
    fn chains_render_in_belief_order() {
        let f = fixture();
        let v = &f.vocab;
        let q = tr(v, "apple", "ObjUsedTo", "wipe");
        let hop = |h: &str, r: &str, t: &str, p: f64| GroundedHop {
            fact: tr(v, h, r, t),
            direction: Direction::Forward,
            plausibility: p,
        };
        let one = |h: GroundedHop| GroundedPath {
            query: q,
            relation_path: RelationPath::new(vec![DirectedRelationStep::forward(h.fact.relation)]),
            belief: h.plausibility,
            hops: vec![h],
        };
        let mut paths =
            vec![one(hop("towel", "ObjUsedTo", "wipe", 0.4)), one(hop("scrubber", "ObjUsedTo", "wipe", 0.9))];
        paths.sort_by(ground::by_belief);
        let text = render_explanation(&q, false, &paths, &TemplateSet::household(), v).unwrap();
        assert_eq!(
            text,
            "I know that a scrubber is used to wipe. I also know that a towel is used to wipe. \
             Therefore, it is unlikely that an apple is used to wipe."
        );
    }

    #[test]
    fn every_grounded_hop_is_believed() {
        let f = fixture();
        let q = tr(&f.vocab, "cleaning_rag", "ObjUsedTo", "wipe");
        for p in ground_path(&q, &path(&f.vocab), &f.m, &f.g, &GroundingConfig::exhaustive()) {
            assert!(p.hops.iter().all(|h| f.m.is_true(&h.fact)));
            assert_eq!(p.nodes().first(), Some(&q.head));
            assert_eq!(p.nodes().last(), Some(&q.tail));
        }
    }
}
