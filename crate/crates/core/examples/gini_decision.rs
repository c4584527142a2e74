//! Gini confidence and the threshold that decides how deep a suggestion goes.
//!
//! cargo run --example gini_decision

use facetpath::decision::{gini, truncate_prediction};
use facetpath::predictors::PathPrediction;
use facetpath::taxonomy::Path;

fn main() -> facetpath::Result<()> {
    for d in [vec![0.25; 4], vec![0.7, 0.1, 0.1, 0.1], vec![0.0, 0.0, 0.0, 1.0]] {
        println!("gini({d:?}) = {:.4}", gini(&d)?);
    }

    // a decoder that is sure about "sport", fairly sure about "basketball", unsure after
    let steps = [vec![0.97, 0.01, 0.01, 0.01], vec![0.85, 0.05, 0.05, 0.05], vec![0.4, 0.3, 0.2, 0.1]];
    let ginis: Vec<f64> = steps.iter().map(|d| gini(d)).collect::<Result<_, _>>()?;
    let pred = PathPrediction {
        nodes: Path::parse("sport/basketball/lebron"),
        step_distributions: steps.to_vec(),
        step_gini: ginis.clone(),
    };
    println!("\nper-node gini {ginis:.4?}");
    for ct in [0.0, 0.3, 0.6, 0.73, 0.9] {
        let p = truncate_prediction(&pred, ct);
        println!("ct {ct:<4} → {}", if p.is_empty() { "(no facet)".to_string() } else { p.to_string() });
    }
    Ok(())
}
