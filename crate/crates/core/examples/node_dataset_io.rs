//! Writes a node dataset in the plain-text layout and reads it back.

use gpconv::data::{format_node_dataset, load_node_dataset, save_node_dataset, SbmConfig};

fn main() -> Result<(), gpconv::error::Error> {
    let ds = SbmConfig::new(4, 2, 0.9, 0.1, 3).generate()?;
    let text = format_node_dataset(&ds);
    print!("{}", text.lines().take(3).map(|l| format!("{l}\n")).collect::<String>());
    println!("...");

    let path = std::env::temp_dir().join("gpconv_example.nds");
    save_node_dataset(&ds, &path)?;
    let back = load_node_dataset(&path)?;
    println!("round trip identical: {}", format_node_dataset(&back) == text);
    std::fs::remove_file(&path).ok();
    Ok(())
}
