//! Offline precision/recall by replaying one logged search: products are
//! relevant when they share a clicked product's path.
//!
//! cargo run --example log_replay

use facetpath::eval::{filtered_result_set, simulate_event, SearchEvent};
use facetpath::taxonomy::{CatalogRow, Path, TaxonomyTree};

fn main() -> facetpath::Result<()> {
    let serp = [
        ("P1", "sport/basketball/lebron"),
        ("P2", "sport/basketball/lebron"),
        ("P3", "sport/basketball/lebron"),
        ("P4", "sport/running/sneakers"),
        ("P5", "sport/basketball/jerseys"),
        ("P6", "sport/basketball/curry"),
        ("P7", "sport/running/sneakers"),
    ];
    let tree = TaxonomyTree::from_rows(serp.iter().map(|(id, p)| CatalogRow {
        product_id: id.to_string(),
        path: Path::parse(p).labels().to_vec(),
        description: String::new(),
    }))?;
    let event = SearchEvent {
        event_id: "demo".into(),
        timestamp: 0,
        query: "nike shoes".into(),
        session_products: vec![],
        result_set: serp.iter().map(|(id, _)| id.to_string()).collect(),
        clicked: vec!["P1".into(), "P4".into()],
    };
    for predicted in ["sport", "sport/basketball", "sport/basketball/lebron"] {
        let p = Path::parse(predicted);
        let o = simulate_event(&event, &p, &tree);
        let kept: Vec<&String> = filtered_result_set(&event, &p, &tree);
        println!(
            "{predicted:<26} kept {kept:?}\n{:<26} TP {} FP {} FN {}  precision {:.4}  recall {:.4}",
            "",
            o.tp,
            o.fp,
            o.fn_,
            o.precision().unwrap(),
            o.recall().unwrap()
        );
    }
    Ok(())
}
