//! Train TuckER on the synthetic household graph and report link prediction.
//!
//!     cargo run --release --example train_embedding -- [epochs]

use kgrecon::kg::SplitKind;
use kgrecon::kge::{link_prediction, train_with_history, TrainConfig};
use kgrecon::synth::{household, HouseholdConfig};

fn main() -> kgrecon::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let data = household(&HouseholdConfig::default());
    println!(
        "{} entities, {} relations, {} / {} / {} train/valid/test facts",
        data.num_entities(),
        data.num_relations(),
        data.train.len(),
        data.valid.len(),
        data.test.len()
    );

    let cfg = TrainConfig { epochs, ..TrainConfig::household() };
    let (model, history) = train_with_history(&data, &cfg)?;
    for (i, loss) in history.epoch_losses.iter().enumerate().filter(|(i, _)| i % 20 == 0 || *i + 1 == epochs) {
        println!("epoch {:>4}  loss {loss:.4}", i + 1);
    }

    let report = link_prediction(&model, &data)?;
    println!("filtered MRR {:.3} (raw {:.3})", report.mrr, report.raw_mrr);
    for (k, v) in &report.hits_at {
        println!("hits@{k:<2} {v:.3}");
    }
    for (r, mrr) in &report.per_relation_mrr {
        println!("  {r:<16} {mrr:.3}");
    }

    let v = &data.vocab;
    let rag = v.entity("cleaning_rag")?;
    let near: Vec<&str> = model.nearest_neighbors(rag, 5)?.into_iter().map(|e| v.entity_name(e)).collect();
    println!("closest to cleaning_rag: {}", near.join(", "));

    let wrong = data.positives(SplitKind::Test).filter(|t| !model.is_true(t)).count();
    println!("{wrong} held-out facts fall below their relation threshold");
    Ok(())
}
