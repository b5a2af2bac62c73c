use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EmbeddingModel;
use crate::error::{Error, Result};
use crate::kg::{DatasetSplits, EntityId, SplitKind, Triple};

pub const HITS_CUTOFFS: [usize; 3] = [1, 3, 10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionReport {
    /// Filtered mean reciprocal rank over head and tail queries.
    pub mrr: f64,
    /// Unfiltered mean reciprocal rank.
    pub raw_mrr: f64,
    pub hits_at: BTreeMap<usize, f64>,
    pub per_relation_mrr: BTreeMap<String, f64>,
    /// Number of ranked queries (two per test triple).
    pub queries: usize,
}

/// `(filtered, raw)` rank of `scores[truth]`, counting every other candidate
/// whose score ties or beats it.
fn ranks(scores: &[f64], truth: usize, filtered_out: impl Fn(usize) -> bool) -> (usize, usize) {
    let target = scores[truth];
    let mut filtered = 1;
    let mut raw = 1;
    for (e, &s) in scores.iter().enumerate() {
        if e == truth || s < target {
            continue;
        }
        raw += 1;
        if !filtered_out(e) {
            filtered += 1;
        }
    }
    (filtered, raw)
}

/// Filtered-setting link prediction over the positive test triples.
pub fn link_prediction(m: &EmbeddingModel, splits: &DatasetSplits) -> Result<LinkPredictionReport> {
    let queries: Vec<Triple> = splits.positives(SplitKind::Test).collect();
    if queries.is_empty() {
        return Err(Error::EmptyTestSplit);
    }
    let known: HashSet<Triple> = splits.all_positives();

    let per_query: Vec<[(usize, usize); 2]> = queries
        .par_iter()
        .map(|q| {
            let tails = m.score_tails(q.head, q.relation);
            let tail_rank =
                ranks(&tails, q.tail.index(), |e| known.contains(&Triple { tail: EntityId(e as u32), ..*q }));
            let heads = m.score_heads(q.relation, q.tail);
            let head_rank =
                ranks(&heads, q.head.index(), |e| known.contains(&Triple { head: EntityId(e as u32), ..*q }));
            [head_rank, tail_rank]
        })
        .collect();

    let n = (per_query.len() * 2) as f64;
    let mut mrr = 0.0;
    let mut raw_mrr = 0.0;
    let mut hits = [0usize; HITS_CUTOFFS.len()];
    let mut rel_sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (q, pair) in queries.iter().zip(&per_query) {
        for &(filtered, raw) in pair {
            let rr = 1.0 / filtered as f64;
            mrr += rr;
            raw_mrr += 1.0 / raw as f64;
            for (h, &cut) in hits.iter_mut().zip(&HITS_CUTOFFS) {
                if filtered <= cut {
                    *h += 1;
                }
            }
            let entry = rel_sum.entry(splits.vocab.relation_name(q.relation).to_string()).or_insert((0.0, 0));
            entry.0 += rr;
            entry.1 += 1;
        }
    }
    Ok(LinkPredictionReport {
        mrr: mrr / n,
        raw_mrr: raw_mrr / n,
        hits_at: HITS_CUTOFFS.iter().zip(hits).map(|(&c, h)| (c, h as f64 / n)).collect(),
        per_relation_mrr: rel_sum.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect(),
        queries: per_query.len() * 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_rank_pessimistically() {
        assert_eq!(ranks(&[1.0, 1.0, 1.0], 1, |_| false), (3, 3));
        assert_eq!(ranks(&[0.5, 2.0, 1.0], 1, |_| false), (1, 1));
        assert_eq!(ranks(&[3.0, 2.0, 1.0], 1, |e| e == 0), (1, 2));
    }
}
