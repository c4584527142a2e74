//! Generate the synthetic shop and print what it contains.
//!
//! cargo run --release --example generate_data -- [out_dir] [seed]

use std::collections::BTreeMap;

use facetpath::eval::Dataset;
use facetpath::synth::{generate_synthetic, SynthConfig};

fn main() -> facetpath::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next();
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let data = generate_synthetic(&SynthConfig::default(), seed)?;
    let ds = Dataset::from_synthetic(&data, 0.8)?;
    println!("products        {}", ds.tree.len());
    println!("leaf paths      {}", ds.tree.full_paths().len());
    println!("node vocabulary {} (incl. START/END)", ds.tree.node_vocabulary().len());
    println!("events          {} ({} searches, {} zero-click)", ds.events.len(), ds.build.search_events, ds.build.zero_click_searches);
    println!("examples        {} train / {} test ({} unseen-query)", ds.split.train.len(), ds.split.test.len(), ds.split.unseen_test.len());

    let mut top: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, p) in ds.tree.products() {
        *top.entry(p.labels()[0].as_str()).or_default() += 1;
    }
    println!("products per top-level category: {top:?}");
    for row in data.manifest.iter().take(5) {
        println!("  {:<28} session {}  → {}", row.query, row.session_id, row.intended_path);
    }

    if let Some(dir) = out {
        data.write_to(&dir)?;
        println!("wrote {dir}");
    }
    Ok(())
}
