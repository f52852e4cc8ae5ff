//! Writes a stochastic block model dataset for use with the CLI.
//!
//! `cargo run --example export_sbm -- out.nds [n_per_block blocks p_in p_out seed]`

use std::path::PathBuf;

use gpconv::data::{save_node_dataset, SbmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().ok_or("usage: export_sbm OUT [n blocks p_in p_out seed]")?);
    let get = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let config = SbmConfig::new(
        get(1, "100").parse()?,
        get(2, "2").parse()?,
        get(3, "0.1").parse()?,
        get(4, "0.01").parse()?,
        get(5, "0").parse()?,
    );
    let ds = config.generate()?;
    save_node_dataset(&ds, &out)?;
    println!("{}: {} nodes, {} edges", out.display(), ds.num_nodes(), ds.graph.num_edges());
    Ok(())
}
