mod common;

use std::sync::OnceLock;

use common::toy::{argmax, cfg, example, featurizer, fit, tree, two_path_toy};
use facetpath::decision::gini;
use facetpath::eventlog::LabeledExample;
use facetpath::nn::History;
use facetpath::predictors::{SessionPathModel, SpArch};
use facetpath::taxonomy::Path;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn memorized() -> &'static (SessionPathModel, History) {
    static M: OnceLock<(SessionPathModel, History)> = OnceLock::new();
    M.get_or_init(|| fit(&two_path_toy(), 300, 1))
}

/// Ambiguous query resolved only by the session; a third of the rows carry no session at all.
fn context_data(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let a_side = rng.gen_bool(0.5);
            let (pool, target) = if a_side { (["a1", "a2", "a3"], "a2") } else { (["b1", "b2", "b3"], "b1") };
            if i % 3 == 0 {
                let target = if rng.gen_bool(0.7) { "a2" } else { "b1" };
                return example(i, "amb", &[], target);
            }
            let k = rng.gen_range(1..=3);
            let session: Vec<&str> = (0..k).map(|_| pool[rng.gen_range(0..3)]).collect();
            example(i, "amb", &session, target)
        })
        .collect()
}

fn contextual() -> &'static SessionPathModel {
    static M: OnceLock<SessionPathModel> = OnceLock::new();
    M.get_or_init(|| {
        let t = tree();
        let data = context_data(300, 2);
        SessionPathModel::train(&data, featurizer(0), t.node_vocabulary(), t.max_depth(), SpArch::default(), &cfg(60, 3))
            .unwrap()
            .0
    })
}

#[test]
fn memorizes_two_paths() {
    let (model, history) = memorized();
    let last = *history.train_loss.last().unwrap();
    assert!(last < 0.05, "final training loss {last}");
    let empty: [&str; 0] = [];
    assert_eq!(model.generate("shoe", &empty).unwrap().nodes, Path::parse("a/x"));
    assert_eq!(model.generate("lamp", &empty).unwrap().nodes, Path::parse("b/w"));
}

#[test]
fn fits_ten_examples_to_near_zero_loss() {
    let cases: [(&str, &[&str], &str); 10] = [
        ("shoe", &[], "a1"),
        ("shoe", &["a1"], "a3"),
        ("shoe", &["b1"], "b3"),
        ("shoe", &["a2", "b2"], "b1"),
        ("lamp", &[], "b3"),
        ("lamp", &["a1"], "a1"),
        ("lamp", &["b1"], "b1"),
        ("amb", &[], "a3"),
        ("amb", &["a3"], "b3"),
        ("amb", &["b3"], "a1"),
    ];
    let data: Vec<LabeledExample> = cases.iter().enumerate().map(|(i, (q, s, t))| example(i, q, s, t)).collect();
    let (_, h) = fit(&data, 400, 4);
    let last = *h.train_loss.last().unwrap();
    assert!(last < 0.01, "final training loss {last}");
}

#[test]
fn fixed_seed_fixed_loss() {
    let data: Vec<LabeledExample> = two_path_toy().into_iter().take(20).collect();
    let (_, a) = fit(&data, 20, 9);
    let (_, b) = fit(&data, 20, 9);
    assert_eq!(a.train_loss, b.train_loss);
    assert_eq!(a.valid_loss, b.valid_loss);
}

#[test]
fn greedy_steps_are_argmax_of_their_distributions() {
    let model = contextual();
    for s in [vec![], vec!["a1"], vec!["b2", "b3"], vec!["a3", "b1"]] {
        let p = model.generate("amb", &s).unwrap();
        assert_eq!(p.step_distributions.len(), p.depth());
        for ((label, dist), g) in p.nodes.labels().iter().zip(&p.step_distributions).zip(&p.step_gini) {
            let id = argmax(dist);
            assert_eq!(&model.vocab.node(facetpath::taxonomy::NodeId(id as u32)).unwrap().label, label);
            assert!((gini(dist).unwrap() - g).abs() < 1e-12);
            assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn session_decides_ambiguous_queries() {
    let model = contextual();
    let held_out: Vec<LabeledExample> =
        context_data(300, 77).into_iter().filter(|e| !e.session_products.is_empty()).collect();
    let hits = held_out
        .iter()
        .filter(|e| model.generate(&e.query, &e.session_products).unwrap().nodes.truncate(1) == e.target_path.truncate(1))
        .count();
    let rate = hits as f64 / held_out.len() as f64;
    assert!(rate >= 0.9, "context sensitivity {rate}");
}

#[test]
fn empty_session_falls_back_to_majority_category() {
    let empty: [&str; 0] = [];
    let p = contextual().generate("amb", &empty).unwrap();
    assert_eq!(p.nodes.truncate(1), Path::parse("a"));
}
