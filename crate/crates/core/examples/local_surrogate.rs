//! Fit a local decision tree around one query and compare it with the
//! global surrogates on the same pool.

use std::collections::HashSet;

use kgrecon::kg::{KnowledgeGraph, SplitKind};
use kgrecon::kge::{train, TrainConfig};
use kgrecon::sfe::{build_augmented_graph, SubstitutionMode};
use kgrecon::surrogate::{agreement, SurrogateConfig, Surrogates};
use kgrecon::synth::{household, HouseholdConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kgrecon::Result<()> {
    let data = household(&HouseholdConfig::default());
    let model = train(&data, &TrainConfig::household())?;
    let g = build_augmented_graph(&KnowledgeGraph::from_splits(&data), &model, 5, SubstitutionMode::Both);
    let v = &data.vocab;

    let r = v.relation("ObjUsedTo")?;
    let q = data.positives(SplitKind::Test).find(|t| t.relation == r).expect("a held-out ObjUsedTo fact");
    println!("query {}  (model says {})", v.display(&q), model.is_true(&q));

    let s = Surrogates::new(&model, &g, SurrogateConfig::default());
    let pool = s.build_pool(r, &HashSet::from([q]), &mut ChaCha8Rng::seed_from_u64(0));
    let positives = pool.labels.iter().filter(|&&y| y).count();
    println!("pool: {} facts ({positives} believed), {} path features", pool.len(), pool.features.num_features());

    let local = s.fit_local(&q, &pool)?;
    let row = s.row(&pool, &q);
    println!(
        "local tree: k = {}, depth {}, training fidelity {:.3}, held-out {:.3}, says {}",
        local.neighborhood_k,
        local.tree.depth(),
        local.fidelity_on_train,
        local.cv_fidelity,
        local.tree.predict(&row)
    );
    for p in local.supporting_paths(&row)? {
        println!("  uses {}", p.label(v));
    }

    let rows: Vec<&[u32]> = (0..pool.len()).map(|i| pool.row(i)).collect();
    let tree = pool.global_tree(&s);
    let linear = pool.global_linear(&s);
    println!("global tree agrees on {:.3} of the pool", agreement(|x| tree.predict(x), &rows, &pool.labels));
    println!("logistic regression agrees on {:.3}", agreement(|x| linear.predict(x), &rows, &pool.labels));
    Ok(())
}
