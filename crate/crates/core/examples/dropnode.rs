//! Samples a DropNode subgraph, aggregates on it and scatters back.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gpconv::aggregation::AggregationKind;
use gpconv::dense::DenseMatrix;
use gpconv::graph::{add_self_loops, build_adjacency, Graph};
use gpconv::layers::{DropNodeDown, DropNodeUp, KeepSpec};

fn main() -> Result<(), gpconv::error::Error> {
    // A 10-cycle with two chords.
    let edges = (0..10).map(|i| (i, (i + 1) % 10)).chain([(0, 5), (2, 7)]);
    let graph = Graph::new(10, edges)?;
    let a_tilde = add_self_loops(&build_adjacency(&graph)?)?;
    let h = DenseMatrix::from_fn(10, 2, |r, c| (r * 2 + c) as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut down = DropNodeDown::new(KeepSpec::Ratio(0.6), AggregationKind::GpconvColStochastic, false);
    let (sub, plan) = down.forward(&h, &a_tilde, None, &mut rng)?;
    println!("kept {:?} ({} of {})", plan.kept_indices, sub.rows(), plan.input_rows);

    let sub_m = plan.aggregation.to_dense();
    let colsums: Vec<String> = sub_m.column_sums().as_slice().iter().map(|s| format!("{s:.3}")).collect();
    println!("induced GPCONV column sums: {}", colsums.join(" "));

    let mixed = plan.aggregation.spmm(&sub)?;
    let mut up = DropNodeUp::new();
    let restored = up.forward(&mixed, &plan.kept_indices, plan.input_rows)?;
    for r in 0..restored.rows() {
        let tag = if plan.kept_indices.contains(&r) { "kept" } else { "zero" };
        println!("row {r}: {:>8.3} {:>8.3}  {tag}", restored.get(r, 0), restored.get(r, 1));
    }
    Ok(())
}
