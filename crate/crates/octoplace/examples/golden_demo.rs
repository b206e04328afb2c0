//! Writes the demo scenes, fixtures and config to a directory.
//!
//! ```text
//! cargo run --example golden_demo -- demo/
//! octoplace place demo/g1-kitchen.png cupcake --config demo/config.json --scene demo/g1-kitchen
//! ```

fn main() -> anyhow::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "demo".to_string());
    octoplace::golden::write_demo(std::path::Path::new(&dir))?;
    eprintln!("wrote demo scenes to {dir}");
    Ok(())
}
