//! The count baseline: exact-match lookup of the dominant path per query.
//!
//! cargo run --release --example count_model

use facetpath::eval::{evaluate, Dataset, DEFAULT_SWEEP};
use facetpath::predictors::{CountModel, Predictor};
use facetpath::synth::{generate_synthetic, SynthConfig};

fn main() -> facetpath::Result<()> {
    let data = generate_synthetic(&SynthConfig::default(), 7)?;
    let ds = Dataset::from_synthetic(&data, 0.8)?;
    let cm = CountModel::train(&ds.split.train);
    println!("{} training queries, {} with a path above {:.0}% share", cm.shares.len(), cm.predictions.len(), cm.threshold * 100.0);
    for (q, p) in cm.predictions.iter().take(5) {
        println!("  {q:<24} → {p}  ({:.2})", cm.share(q, p).unwrap());
    }
    let (report, _) = evaluate("cm", &Predictor::Cm(cm), &ds.split, &ds.tree, &DEFAULT_SWEEP)?;
    let a = &report.accuracy;
    println!("\naccuracy D=last: overall {:.3}, seen {:.3}, unseen {:.3}", a.overall.last.unwrap(), a.seen.last.unwrap(), a.unseen.last.unwrap());
    Ok(())
}
