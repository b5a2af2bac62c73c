//! Corrupting a dataset, collecting corrections of the corrupted facts, and
//! measuring what the corrections buy after retraining.

mod experiment;
mod review;

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::kg::{DatasetSplits, EntityId, Position, SplitKind, Triple};
use crate::kge::EmbeddingModel;

pub use experiment::{
    median, run_experiment, write_curve_csv, CorrectionScope, CurvePoint, ExperimentConfig, ExperimentReport, SeedRun,
};
pub use review::{explain_suspects, review_hops, review_slot, ReviewHop, SuspectConfig, SuspectReport};

/// Options shown per reviewed fact: the fact itself, three alternates, and
/// "none of the above".
pub const NUM_OPTIONS: usize = 5;
pub const NUM_ALTERNATES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionEntry {
    pub original: Triple,
    pub corrupted: Triple,
    /// The slot that was replaced.
    pub position: Position,
}

/// Training facts to corrupt, grouped by relation id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub rate: f64,
    pub seed: u64,
    pub per_relation: Vec<Vec<CorruptionEntry>>,
}

impl CorruptionPlan {
    pub fn entries(&self) -> impl Iterator<Item = &CorruptionEntry> {
        self.per_relation.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.per_relation.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry whose corrupted triple is `t`.
    pub fn find(&self, t: &Triple) -> Option<&CorruptionEntry> {
        self.per_relation.get(t.relation.index())?.iter().find(|e| e.corrupted == *t)
    }

    /// `clean` with every planned training fact swapped for its corruption,
    /// in place.
    pub fn apply(&self, clean: &DatasetSplits) -> DatasetSplits {
        let swap: HashMap<Triple, Triple> = self.entries().map(|e| (e.original, e.corrupted)).collect();
        let mut out = clean.clone();
        for lt in &mut out.train {
            if lt.label {
                if let Some(c) = swap.get(&lt.triple) {
                    lt.triple = *c;
                }
            }
        }
        out
    }
}

/// Choose `⌊rate · n⌋` training facts of each relation (at least one when
/// both are non-zero) and replace the head or tail of each with a random
/// other entity, never producing a fact of the clean dataset.
pub fn make_corruption_plan(splits: &DatasetSplits, rate: f64, seed: u64) -> Result<CorruptionPlan> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!("corruption rate {rate} outside [0, 1]")));
    }
    let ne = splits.num_entities() as u32;
    let clean = splits.all_positives();
    let mut by_rel: Vec<Vec<Triple>> = vec![Vec::new(); splits.num_relations()];
    for t in splits.positives(SplitKind::Train) {
        by_rel[t.relation.index()].push(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: HashSet<Triple> = HashSet::new();
    let mut per_relation = Vec::with_capacity(by_rel.len());
    for facts in &by_rel {
        let n = facts.len();
        let mut k = (rate * n as f64 + 1e-9).floor() as usize;
        if n > 0 && rate > 0.0 {
            k = k.max(1);
        }
        let mut picked = sample(&mut rng, n, k.min(n)).into_vec();
        picked.sort_unstable();
        let mut entries = Vec::with_capacity(k);
        for i in picked {
            let original = facts[i];
            match corrupt_one(&original, ne, &clean, &taken, &mut rng) {
                Some((corrupted, position)) => {
                    taken.insert(corrupted);
                    entries.push(CorruptionEntry { original, corrupted, position });
                }
                None => warn!(?original, "no admissible corruption; fact left clean"),
            }
        }
        per_relation.push(entries);
    }
    Ok(CorruptionPlan { rate, seed, per_relation })
}

fn corrupt_one(
    t: &Triple,
    ne: u32,
    clean: &HashSet<Triple>,
    taken: &HashSet<Triple>,
    rng: &mut impl Rng,
) -> Option<(Triple, Position)> {
    if ne < 2 {
        return None;
    }
    for _ in 0..256 {
        let position = if rng.gen_bool(0.5) { Position::Head } else { Position::Tail };
        let e = EntityId(rng.gen_range(0..ne));
        if e == t.entity_at(position) {
            continue;
        }
        let c = t.with_entity(position, e);
        if !clean.contains(&c) && !taken.contains(&c) {
            return Some((c, position));
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "fact", rename_all = "snake_case")]
pub enum CorrectionOption {
    Fact(Triple),
    NoneOfTheAbove,
}

/// The presented fact, the three best-scoring replacements of its `slot`
/// entity, and "none of the above".
pub fn propose_options(hop: &Triple, m: &EmbeddingModel, slot: Position) -> Result<Vec<CorrectionOption>> {
    m.score(hop)?;
    let found = m.num_entities().saturating_sub(1);
    if found < NUM_ALTERNATES {
        return Err(Error::TooFewCandidates { needed: NUM_ALTERNATES, found });
    }
    let scores = match slot {
        Position::Head => m.score_heads(hop.relation, hop.tail),
        Position::Tail => m.score_tails(hop.head, hop.relation),
    };
    let current = hop.entity_at(slot).index();
    let mut ranked: Vec<usize> = (0..scores.len()).filter(|&e| e != current).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut options = vec![CorrectionOption::Fact(*hop)];
    options.extend(
        ranked[..NUM_ALTERNATES].iter().map(|&e| CorrectionOption::Fact(hop.with_entity(slot, EntityId(e as u32)))),
    );
    options.push(CorrectionOption::NoneOfTheAbove);
    Ok(options)
}

/// Index of the option consistent with the clean data: the original fact
/// if it was offered, otherwise "none of the above".
pub fn correct_option(entry: &CorruptionEntry, options: &[CorrectionOption]) -> usize {
    options
        .iter()
        .position(|o| *o == CorrectionOption::Fact(entry.original))
        .or_else(|| options.iter().position(|o| *o == CorrectionOption::NoneOfTheAbove))
        .unwrap_or(options.len().saturating_sub(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionSource {
    Human,
    Simulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub explanation_id: String,
    /// The fact shown for review.
    pub hop: Triple,
    pub slot: Position,
    pub options: Vec<CorrectionOption>,
    pub chosen: usize,
    pub source: CorrectionSource,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

impl CorrectionRecord {
    pub fn validate(&self) -> Result<()> {
        if self.options.len() != NUM_OPTIONS {
            return Err(Error::InvalidConfig(format!("expected {NUM_OPTIONS} options, got {}", self.options.len())));
        }
        if self.chosen >= NUM_OPTIONS {
            return Err(Error::InvalidConfig(format!("chosen option {} out of range", self.chosen)));
        }
        Ok(())
    }

    pub fn chosen_option(&self) -> Option<&CorrectionOption> {
        self.options.get(self.chosen)
    }
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Picks the consistent option with probability `accuracy`, otherwise a
/// uniformly random other option.
///
/// Draws depend only on the seed and the item order, so raising the
/// accuracy only turns wrong answers into right ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedCorrector {
    pub accuracy: f64,
    pub seed: u64,
}

impl SimulatedCorrector {
    pub fn new(accuracy: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::InvalidConfig(format!("corrector accuracy {accuracy} outside [0, 1]")));
        }
        Ok(SimulatedCorrector { accuracy, seed })
    }

    /// One choice per item given each item's consistent option index.
    pub fn choose(&self, correct: &[usize]) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        correct
            .iter()
            .map(|&c| {
                let u: f64 = rng.gen();
                let w = rng.gen_range(0..NUM_OPTIONS - 1);
                if u < self.accuracy {
                    c
                } else if w < c {
                    w
                } else {
                    w + 1
                }
            })
            .collect()
    }
}

/// A review item per planned corruption, with options from `m`.
pub fn review_items(
    plan: &CorruptionPlan,
    m: &EmbeddingModel,
) -> Result<Vec<(String, CorruptionEntry, Vec<CorrectionOption>)>> {
    plan.entries()
        .enumerate()
        .map(|(i, e)| Ok((format!("corruption-{i}"), *e, propose_options(&e.corrupted, m, e.position)?)))
        .collect()
}

/// Simulated answers for the given review items.
pub fn simulate_corrections(
    items: &[(String, CorruptionEntry, Vec<CorrectionOption>)],
    corrector: &SimulatedCorrector,
) -> Vec<CorrectionRecord> {
    let correct: Vec<usize> = items.iter().map(|(_, e, o)| correct_option(e, o)).collect();
    let ts = now_millis();
    items
        .iter()
        .zip(corrector.choose(&correct))
        .map(|((id, e, options), chosen)| CorrectionRecord {
            explanation_id: id.clone(),
            hop: e.corrupted,
            slot: e.position,
            options: options.clone(),
            chosen,
            source: CorrectionSource::Simulated,
            timestamp: ts,
        })
        .collect()
}

/// What a wrong answer does to the dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrongChoiceMode {
    /// Keep the corrupted fact.
    #[default]
    Retain,
    /// Act on the chosen option anyway.
    Substitute,
}

/// The corrected dataset: each record resolves its corrupted training fact
/// to the original, to the chosen wrong fact, to nothing, or leaves it.
/// Unaffected facts keep their order.
pub fn apply_corrections(
    corrupted: &DatasetSplits,
    plan: &CorruptionPlan,
    records: &[CorrectionRecord],
    mode: WrongChoiceMode,
) -> Result<DatasetSplits> {
    // corrupted fact -> replacement (None drops it)
    let mut actions: HashMap<Triple, Option<Triple>> = HashMap::new();
    for r in records {
        r.validate()?;
        let entry = plan.find(&r.hop).ok_or_else(|| Error::DanglingExplanation(r.explanation_id.clone()))?;
        let chosen = r.options[r.chosen];
        let right = r.chosen == correct_option(entry, &r.options);
        let act = match (right, mode, chosen) {
            (false, WrongChoiceMode::Retain, _) => continue,
            (_, _, CorrectionOption::NoneOfTheAbove) => None,
            (_, _, CorrectionOption::Fact(f)) if f == entry.corrupted => continue,
            (_, _, CorrectionOption::Fact(f)) => Some(f),
        };
        actions.insert(entry.corrupted, act);
    }
    let mut out = corrupted.clone();
    let mut present: HashSet<Triple> = out.train.iter().filter(|lt| lt.label).map(|lt| lt.triple).collect();
    out.train.retain_mut(|lt| {
        if !lt.label {
            return true;
        }
        match actions.get(&lt.triple) {
            None => true,
            Some(None) => false,
            Some(Some(f)) => {
                if present.insert(*f) {
                    lt.triple = *f;
                    true
                } else {
                    false
                }
            }
        }
    });
    Ok(out)
}

pub fn write_jsonl(path: &Path, records: &[CorrectionRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn append_jsonl(path: &Path, record: &CorrectionRecord) -> Result<()> {
    append_jsonl_value(path, record)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<CorrectionRecord>> {
    read_jsonl_values(path)
}

/// Append one JSON line.
pub fn append_jsonl_value<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    file.write_all(&line).map_err(|e| Error::io(path, e))
}

/// One value per non-blank line.
pub fn read_jsonl_values<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{LabeledTriple, RelationId, Vocabulary};
    use std::sync::Arc;

    fn t(h: u32, r: u32, tl: u32) -> Triple {
        Triple::new(EntityId(h), RelationId(r), EntityId(tl))
    }

    /// Relation 0: ten facts i -> i+10. Relation 1: three facts.
    fn splits() -> DatasetSplits {
        let train = (0..10)
            .map(|i| t(i, 0, i + 10))
            .chain([t(0, 1, 1), t(1, 1, 2), t(2, 1, 3)])
            .map(LabeledTriple::positive)
            .collect();
        DatasetSplits {
            vocab: Arc::new(Vocabulary::synthetic(20, 2)),
            train,
            valid: vec![LabeledTriple::positive(t(3, 1, 4))],
            test: vec![LabeledTriple::positive(t(4, 1, 5))],
        }
    }

    #[test]
    fn plan_sizes_follow_the_rate() {
        let s = splits();
        assert!(make_corruption_plan(&s, 0.0, 1).unwrap().is_empty());
        let p = make_corruption_plan(&s, 0.3, 1).unwrap();
        assert_eq!(p.per_relation[0].len(), 3);
        // 0.3 · 3 rounds down to 0, lifted to 1.
        assert_eq!(p.per_relation[1].len(), 1);
        assert_eq!(make_corruption_plan(&s, 1.0, 1).unwrap().len(), 13);
        assert!(make_corruption_plan(&s, 1.5, 1).is_err());
    }

    #[test]
    fn plan_is_seeded_and_avoids_clean_facts() {
        let s = splits();
        let clean = s.all_positives();
        for seed in 0..50 {
            let p = make_corruption_plan(&s, 1.0, seed).unwrap();
            assert_eq!(p, make_corruption_plan(&s, 1.0, seed).unwrap());
            let mut seen = HashSet::new();
            for e in p.entries() {
                assert!(!clean.contains(&e.corrupted));
                assert!(seen.insert(e.corrupted));
                assert_eq!(e.original.with_entity(e.position, e.corrupted.entity_at(e.position)), e.corrupted);
                assert_ne!(e.original.entity_at(e.position), e.corrupted.entity_at(e.position));
            }
        }
    }

    #[test]
    fn applying_a_plan_changes_exactly_the_planned_facts() {
        let s = splits();
        let p = make_corruption_plan(&s, 0.5, 3).unwrap();
        let c = p.apply(&s);
        let before: HashSet<Triple> = s.train.iter().map(|l| l.triple).collect();
        let after: HashSet<Triple> = c.train.iter().map(|l| l.triple).collect();
        let removed: HashSet<Triple> = before.difference(&after).copied().collect();
        let added: HashSet<Triple> = after.difference(&before).copied().collect();
        assert_eq!(removed, p.entries().map(|e| e.original).collect());
        assert_eq!(added, p.entries().map(|e| e.corrupted).collect());
        assert_eq!(c.test, s.test);
    }

    /// Scores for (h, r, t): tail id for relation 0, so higher ids rank first.
    fn ranked_model() -> EmbeddingModel {
        EmbeddingModel::from_score_table(5, 1, |x| x.tail.0 as f64 + 0.1 * x.head.0 as f64)
    }

    #[test]
    fn options_follow_the_score_ranking() {
        let m = ranked_model();
        let hop = t(1, 0, 2);
        let opts = propose_options(&hop, &m, Position::Tail).unwrap();
        assert_eq!(opts.len(), NUM_OPTIONS);
        // Brute force: rank every other tail by score.
        let mut cands: Vec<u32> = (0..5).filter(|&e| e != 2).collect();
        cands.sort_by(|a, b| m.raw_score(&t(1, 0, *b)).total_cmp(&m.raw_score(&t(1, 0, *a))).then(a.cmp(b)));
        let expect: Vec<CorrectionOption> = std::iter::once(CorrectionOption::Fact(hop))
            .chain(cands[..3].iter().map(|&e| CorrectionOption::Fact(t(1, 0, e))))
            .chain([CorrectionOption::NoneOfTheAbove])
            .collect();
        assert_eq!(opts, expect);
        let heads = propose_options(&hop, &m, Position::Head).unwrap();
        assert_eq!(heads[1], CorrectionOption::Fact(t(4, 0, 2)));
        assert!(!heads[1..].contains(&CorrectionOption::Fact(hop)));
    }

    #[test]
    fn too_few_entities_for_options() {
        let m = EmbeddingModel::from_score_table(3, 1, |_| 0.0);
        assert!(matches!(
            propose_options(&t(0, 0, 1), &m, Position::Tail),
            Err(Error::TooFewCandidates { needed: 3, found: 2 })
        ));
    }

    #[test]
    fn corrector_accuracy_extremes_and_nesting() {
        let correct: Vec<usize> = (0..200).map(|i| i % NUM_OPTIONS).collect();
        let all = SimulatedCorrector::new(1.0, 9).unwrap().choose(&correct);
        assert_eq!(all, correct);
        let none = SimulatedCorrector::new(0.0, 9).unwrap().choose(&correct);
        assert!(none.iter().zip(&correct).all(|(a, b)| a != b && *a < NUM_OPTIONS));
        let lo = SimulatedCorrector::new(0.4, 9).unwrap().choose(&correct);
        let hi = SimulatedCorrector::new(0.8, 9).unwrap().choose(&correct);
        for i in 0..correct.len() {
            assert!(lo[i] != correct[i] || hi[i] == correct[i]);
        }
        assert!(SimulatedCorrector::new(-0.1, 0).is_err());
    }

    #[test]
    fn corrector_restores_about_p() {
        // Seeded binomial draw: 100 items at p = 0.866.
        let c = SimulatedCorrector::new(0.866, 2024).unwrap();
        let choices = c.choose(&[0; 100]);
        let hits = choices.iter().filter(|&&x| x == 0).count();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let expect = (0..100)
            .filter(|_| {
                let u: f64 = rng.gen();
                let _ = rng.gen_range(0..NUM_OPTIONS - 1);
                u < 0.866
            })
            .count();
        assert_eq!(hits, expect);
        assert!((75..=97).contains(&hits));
    }

    fn record(e: &CorruptionEntry, options: Vec<CorrectionOption>, chosen: usize) -> CorrectionRecord {
        CorrectionRecord {
            explanation_id: "x".into(),
            hop: e.corrupted,
            slot: e.position,
            options,
            chosen,
            source: CorrectionSource::Human,
            timestamp: 0,
        }
    }

    fn opts(e: &CorruptionEntry, include_original: bool) -> Vec<CorrectionOption> {
        let other = |k: u32| CorrectionOption::Fact(e.corrupted.with_entity(e.position, EntityId(19 - k)));
        vec![
            CorrectionOption::Fact(e.corrupted),
            if include_original { CorrectionOption::Fact(e.original) } else { other(0) },
            other(1),
            other(2),
            CorrectionOption::NoneOfTheAbove,
        ]
    }

    #[test]
    fn corrections_restore_or_retain() {
        let s = splits();
        let plan = make_corruption_plan(&s, 0.5, 5).unwrap();
        let bad = plan.apply(&s);
        let all: Vec<CorrectionRecord> = plan.entries().map(|e| record(e, opts(e, true), 1)).collect();
        let fixed = apply_corrections(&bad, &plan, &all, WrongChoiceMode::Retain).unwrap();
        assert_eq!(fixed, s);
        assert_eq!(apply_corrections(&bad, &plan, &[], WrongChoiceMode::Retain).unwrap(), bad);
        let twice: Vec<CorrectionRecord> = all.iter().chain(&all).cloned().collect();
        assert_eq!(apply_corrections(&bad, &plan, &twice, WrongChoiceMode::Retain).unwrap(), s);

        // Wrong answers: retained, or acted on in substitute mode.
        let e = plan.entries().next().unwrap();
        let wrong = record(e, opts(e, true), 2);
        assert_eq!(apply_corrections(&bad, &plan, std::slice::from_ref(&wrong), WrongChoiceMode::Retain).unwrap(), bad);
        let sub = apply_corrections(&bad, &plan, std::slice::from_ref(&wrong), WrongChoiceMode::Substitute).unwrap();
        let CorrectionOption::Fact(chosen) = wrong.options[2] else { unreachable!() };
        let added: Vec<Triple> =
            sub.train.iter().map(|l| l.triple).filter(|x| !bad.train.iter().any(|b| b.triple == *x)).collect();
        assert_eq!(added, vec![chosen]);
    }

    #[test]
    fn none_of_the_above_drops_when_original_missing() {
        let s = splits();
        let plan = make_corruption_plan(&s, 0.3, 5).unwrap();
        let bad = plan.apply(&s);
        let e = plan.entries().next().unwrap();
        let o = opts(e, false);
        assert_eq!(correct_option(e, &o), 4);
        let out = apply_corrections(&bad, &plan, &[record(e, o, 4)], WrongChoiceMode::Retain).unwrap();
        assert_eq!(out.train.len(), bad.train.len() - 1);
        assert!(!out.train.iter().any(|l| l.triple == e.corrupted || l.triple == e.original));
    }

    #[test]
    fn dangling_records_are_rejected() {
        let s = splits();
        let plan = make_corruption_plan(&s, 0.3, 5).unwrap();
        let e = CorruptionEntry { original: t(0, 0, 10), corrupted: t(0, 0, 19), position: Position::Tail };
        let mut r = record(&e, opts(&e, true), 1);
        r.explanation_id = "missing".into();
        let found = plan.find(&e.corrupted).is_some();
        let res = apply_corrections(&plan.apply(&s), &plan, &[r], WrongChoiceMode::Retain);
        if !found {
            assert!(matches!(res, Err(Error::DanglingExplanation(ref id)) if id == "missing"));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let e = CorruptionEntry { original: t(0, 0, 10), corrupted: t(0, 0, 11), position: Position::Tail };
        let a = record(&e, opts(&e, true), 1);
        let b = record(&e, opts(&e, false), 4);
        write_jsonl(&path, std::slice::from_ref(&a)).unwrap();
        append_jsonl(&path, &b).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), vec![a, b]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"none_of_the_above\""));
    }
}
