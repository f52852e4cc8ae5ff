//! Prints the three aggregation matrices of a four-node graph.
//!
//! Node 1 has the highest degree. Row-normalized (DGCNN) aggregation gives
//! its message the same weight as any other neighbor, while GPCONV divides
//! it by the sender's degree, so busy nodes speak more quietly.

use gpconv::aggregation::AggregationKind;
use gpconv::graph::{add_self_loops, build_adjacency, degree_vector, Graph};

fn main() -> Result<(), gpconv::error::Error> {
    let graph = Graph::new(4, [(0, 1), (0, 3), (1, 2), (1, 3)])?;
    let a_tilde = add_self_loops(&build_adjacency(&graph)?)?;
    println!("degrees with self-loops: {:?}\n", degree_vector(&a_tilde)?);

    for kind in AggregationKind::ALL {
        let m = kind.build(&a_tilde)?.to_dense();
        println!("{}:", kind.name());
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.4}")).collect();
            println!("  {}", row.join(" "));
        }
        let m = kind.build(&a_tilde)?;
        let fmt = |v: Vec<f64>| v.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(" ");
        println!("  row sums {}\n  col sums {}\n", fmt(m.row_sums()), fmt(m.col_sums()));
    }

    let gp = AggregationKind::GpconvColStochastic.build(&a_tilde)?;
    let dg = AggregationKind::DgcnnRowStochastic.build(&a_tilde)?;
    println!("gpconv == dgcnnᵀ: {}", gp == dg.transpose());
    Ok(())
}
