//! Trains a two-layer GPCONV model on a two-block stochastic block model.
//!
//! `cargo run --release --example train_sbm -- [seed]`

use gpconv::data::SbmConfig;
use gpconv::model::ModelConfig;
use gpconv::train::{train_node, TrainSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let ds = SbmConfig::new(100, 2, 0.1, 0.01, seed).generate()?;
    println!(
        "SBM: {} nodes, {} edges, splits {}/{}/{}",
        ds.num_nodes(),
        ds.graph.num_edges(),
        ds.train.len(),
        ds.val.len(),
        ds.test.len()
    );

    let config = ModelConfig::node_default(ds.features().cols(), ds.num_classes);
    let spec = TrainSpec {
        epochs: 200,
        patience: None,
        ..TrainSpec::node(0.01)
    };
    let report = train_node(&ds, &config, &spec, seed)?;
    for (epoch, (loss, acc)) in report.train_loss.iter().zip(&report.val_accuracy).enumerate().step_by(20) {
        println!("epoch {epoch:>3}  loss {loss:.4}  val {:.3}", acc);
    }
    println!(
        "best epoch {}, test accuracy {:.1}%",
        report.best_epoch,
        100.0 * report.test_accuracy
    );
    Ok(())
}
