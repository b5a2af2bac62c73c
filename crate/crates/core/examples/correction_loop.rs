//! Corrupt the household graph, let a simulated reviewer fix it at several
//! accuracies, retrain, and print the MRR curve.
//!
//!     cargo run --release --example correction_loop -- [epochs]
//!
//! The default of 100 epochs keeps this to a minute or so; the full
//! experiment (`kgrecon run-experiment`) uses 400 and three seeds.

use kgrecon::feedback::{run_experiment, ExperimentConfig};
use kgrecon::kge::TrainConfig;
use kgrecon::synth::{household, HouseholdConfig};

fn main() -> kgrecon::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let data = household(&HouseholdConfig::default());
    let cfg = ExperimentConfig {
        seeds: vec![0],
        train: TrainConfig { epochs, ..TrainConfig::household() },
        max_explanations: 0,
        clean_reference: false,
        ..Default::default()
    };
    let rep = run_experiment(&data, &cfg)?;
    let run = &rep.runs[0];
    println!("{} training facts corrupted", run.corrupted);
    println!("MRR with corrupted data      {:.3}", rep.mrr_corrupted);
    println!(
        "MRR after review at p={:.3}  {:.3} ({:+.0}%)",
        rep.correction_accuracy_used,
        rep.mrr_corrected,
        100.0 * rep.relative_improvement
    );
    println!("\naccuracy  MRR    restored");
    for p in &rep.curve {
        println!("{:>8.2}  {:.3}  {}", p.accuracy, p.mrr, p.restored);
    }
    Ok(())
}
