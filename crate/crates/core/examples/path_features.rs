//! Relation paths between entity pairs, and the binary feature matrix they
//! induce for one relation.

use std::sync::Arc;

use kgrecon::kg::KnowledgeGraph;
use kgrecon::sfe::{build_feature_matrix, extract_paths, AugmentedGraph};
use kgrecon::synth::{household, HouseholdConfig};

fn main() -> kgrecon::Result<()> {
    let data = household(&HouseholdConfig::default());
    let g = AugmentedGraph::from_graph(&KnowledgeGraph::from_splits(&data));
    let v = Arc::clone(&data.vocab);

    let (rag, wipe) = (v.entity("cleaning_rag")?, v.entity("wipe")?);
    let used_to = v.relation("ObjUsedTo")?;
    let paths = extract_paths(&g, rag, wipe, 3, Some(used_to));
    println!("{} paths from cleaning_rag to wipe, e.g.", paths.len());
    for p in paths.iter().take(8) {
        println!("  {}", p.label(&v));
    }

    let pairs: Vec<_> =
        ["towel", "sponge", "apple", "broom"].iter().filter_map(|h| v.entity(h).ok()).map(|h| (h, wipe)).collect();
    let m = build_feature_matrix(&g, &pairs, used_to, 3)?;
    println!("\n{} distinct paths over {} pairs", m.num_features(), m.len());
    for (i, (h, _)) in pairs.iter().enumerate() {
        println!("  {:<10} {} paths present", v.entity_name(*h), m.row(i).len());
    }
    Ok(())
}
