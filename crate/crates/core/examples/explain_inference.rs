//! Explain a handful of held-out facts in plain language.
//!
//!     cargo run --release --example explain_inference -- [count]

use std::collections::HashSet;

use kgrecon::explain::{explain, ExplainConfig, TemplateSet};
use kgrecon::kg::{KnowledgeGraph, SplitKind, Triple};
use kgrecon::kge::{train, TrainConfig};
use kgrecon::sfe::{build_augmented_graph, SubstitutionMode};
use kgrecon::surrogate::{SurrogateConfig, Surrogates};
use kgrecon::synth::{household, HouseholdConfig};
use kgrecon::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kgrecon::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let data = household(&HouseholdConfig::default());
    let model = train(&data, &TrainConfig::household())?;
    let g = build_augmented_graph(&KnowledgeGraph::from_splits(&data), &model, 5, SubstitutionMode::Both);
    let templates = TemplateSet::household();
    let s = Surrogates::new(&model, &g, SurrogateConfig::default());

    // One relation keeps this to a single pool.
    let r = data.vocab.relation("ObjUsedTo")?;
    let queries: Vec<Triple> = data.positives(SplitKind::Test).filter(|t| t.relation == r).collect();
    let exclude: HashSet<Triple> = queries.iter().copied().collect();
    let pool = s.build_pool(r, &exclude, &mut ChaCha8Rng::seed_from_u64(1));

    let mut shown = 0;
    let mut first = None;
    for q in &queries {
        if shown == n {
            break;
        }
        let local = s.fit_local(q, &pool)?;
        let row = s.row(&pool, q);
        match explain(q, &model, &local, &row, &g, &templates, &ExplainConfig::default()) {
            Ok(x) if !x.grounded_paths.is_empty() => {
                println!("{}\n  {}", data.vocab.display(q), x.text);
                for p in &x.grounded_paths {
                    println!("  belief {:.3} via {}", p.belief, p.relation_path.label(&data.vocab));
                }
                shown += 1;
                first.get_or_insert(x);
            }
            Ok(_) => {}
            Err(Error::Disagreement { .. }) => println!("{}: surrogate disagrees, skipped", data.vocab.display(q)),
            Err(e) => return Err(e),
        }
    }
    if let Some(x) = first {
        println!("\nrecord:\n{}", serde_json::to_string_pretty(&x.record(&data.vocab)).unwrap());
    }
    Ok(())
}
