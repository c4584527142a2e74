//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! cargo test --release --test acceptance

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use common::gini_double_sum;
use common::grad::{self, TOL};
use common::toy;
use facetpath::app::service::{router, AppState, ArtifactSet, AugmentRequest};
use facetpath::app::ServiceConfig;
use facetpath::decision::{gini, truncate_prediction, DEFAULT_CT};
use facetpath::embeddings::SkipGramConfig;
use facetpath::eval::{
    evaluate, filtered_result_set, run_experiment_suite, simulate_event, train_variant, Dataset, Embeddings, EncoderKind,
    ModelSettings, SearchEvent, SuiteConfig, SuiteReport, Variant, DEFAULT_SWEEP,
};
use facetpath::predictors::{ModelKind, PathPrediction, Predictor};
use facetpath::synth::{generate_synthetic, SynthConfig, SyntheticData, CATALOG_FILE, EVENTS_FILE, MANIFEST_FILE};
use facetpath::taxonomy::{CatalogRow, Path, TaxonomyTree};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

const DATA_SEED: u64 = 7;
const SUITE_BUDGET: Duration = Duration::from_secs(15 * 60);

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Check { pass, detail: detail.into() }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- worked example

fn worked_example() -> Check {
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
    }))
    .unwrap();
    let event = SearchEvent {
        event_id: "fixture".into(),
        timestamp: 0,
        query: "nike shoes".into(),
        session_products: vec![],
        result_set: serp.iter().map(|(id, _)| id.to_string()).collect(),
        clicked: vec!["P1".into(), "P4".into()],
    };
    let expected = [
        ("sport", 5.0 / 7.0, 1.0),
        ("sport/basketball", 0.6, 0.6),
        ("sport/basketball/lebron", 1.0, 0.6),
    ];
    // oracle: string-prefix filtering against the clicked products' paths
    let truth: BTreeSet<&str> = ["P1", "P4"].iter().map(|c| serp.iter().find(|(id, _)| id == c).unwrap().1).collect();
    let mut ok = true;
    let mut got = Vec::new();
    for (predicted, p_exp, r_exp) in expected {
        let kept: Vec<&str> = serp
            .iter()
            .filter(|(_, p)| *p == predicted || p.starts_with(&format!("{predicted}/")))
            .map(|(_, p)| *p)
            .collect();
        let tp = kept.iter().filter(|p| truth.contains(*p)).count() as f64;
        let relevant = serp.iter().filter(|(_, p)| truth.contains(p)).count() as f64;
        let o = simulate_event(&event, &Path::parse(predicted), &tree);
        let (p, r) = (o.precision().unwrap(), o.recall().unwrap());
        ok &= close(p, p_exp, 1e-12) && close(r, r_exp, 1e-12);
        ok &= close(p, tp / kept.len() as f64, 1e-12) && close(r, tp / relevant, 1e-12);
        got.push(format!("{predicted}=({p:.4},{r:.4})"));
    }
    Check::new(ok, got.join(" "))
}

// ---------------------------------------------------------------- gini

fn gini_correctness() -> Check {
    let mut worst_edge: f64 = 0.0;
    for n in 2..=1000usize {
        let uniform = vec![1.0 / n as f64; n];
        let mut one_hot = vec![0.0; n];
        one_hot[n / 2] = 1.0;
        worst_edge = worst_edge.max(gini(&uniform).unwrap().abs());
        worst_edge = worst_edge.max((gini(&one_hot).unwrap() - (n as f64 - 1.0) / n as f64).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_random: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.gen_range(1..300);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        worst_random = worst_random.max((gini(&d).unwrap() - gini_double_sum(&d)).abs());
    }
    let worked = gini(&[0.7, 0.1, 0.1, 0.1]).unwrap();
    let pass = worst_edge < 1e-12 && worst_random < 1e-9 && close(worked, 0.45, 1e-15);
    Check::new(pass, format!("edge err {worst_edge:.1e}, random vs double sum {worst_random:.1e}, (0.7,0.1,0.1,0.1) -> {worked}"))
}

// ---------------------------------------------------------------- gradients

fn gradient_checks() -> Check {
    let started = Instant::now();
    let errs: Vec<(&str, f64)> = grad::CHECKS.iter().map(|(name, f)| (*name, f())).collect();
    let elapsed = started.elapsed();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    Check::new(
        worst < TOL && elapsed < Duration::from_secs(60),
        format!("{} checks, max rel err {worst:.1e}, {:.2}s", errs.len(), elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- truncation

/// Oracle: walk the path while each step's Gini clears the threshold.
fn oracle_truncate(p: &PathPrediction, ct: f64) -> Path {
    let k = p.step_gini.iter().take_while(|&&g| g >= ct).count();
    p.nodes.truncate(k)
}

fn truncation_monotonicity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..1000 {
        let depth = rng.gen_range(0..6);
        let ginis: Vec<f64> = (0..depth).map(|_| if rng.gen_bool(0.2) { 1.0 } else { rng.gen_range(0.0..1.0) }).collect();
        let pred = PathPrediction {
            nodes: Path::new((0..depth).map(|i| format!("n{i}"))),
            step_distributions: vec![Vec::new(); depth],
            step_gini: ginis.clone(),
        };
        let mut cts: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..=1.0)).chain(ginis).chain([0.0, 1.0]).collect();
        cts.sort_by(f64::total_cmp);
        let cuts: Vec<Path> = cts.iter().map(|&ct| truncate_prediction(&pred, ct)).collect();
        for (ct, cut) in cts.iter().zip(&cuts) {
            violations += usize::from(*cut != oracle_truncate(&pred, *ct));
        }
        for w in cuts.windows(2) {
            violations += usize::from(!w[1].is_prefix_of(&w[0]));
        }
    }
    // filtering: deeper prefixes of the same path never keep more and never recall more
    let tree = binary_tree();
    let ids: Vec<String> = tree.products().into_iter().map(|(id, _)| id.clone()).collect();
    let mut event_checks = 0;
    for _ in 0..1000 {
        let result_set: Vec<String> = ids.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        if result_set.is_empty() {
            continue;
        }
        let clicked = vec![result_set[rng.gen_range(0..result_set.len())].clone()];
        let event = SearchEvent {
            event_id: "e".into(),
            timestamp: 0,
            query: "q".into(),
            session_products: vec![],
            result_set,
            clicked,
        };
        let full = tree.path_of(&ids[rng.gen_range(0..ids.len())]).unwrap().clone();
        let mut prev: Option<(BTreeSet<String>, f64)> = None;
        for k in 0..=full.depth() {
            let p = full.truncate(k);
            let kept: BTreeSet<String> = filtered_result_set(&event, &p, &tree).into_iter().cloned().collect();
            let recall = simulate_event(&event, &p, &tree).recall().unwrap();
            if let Some((pk, pr)) = &prev {
                violations += usize::from(!kept.is_subset(pk) || recall > *pr);
            }
            prev = Some((kept, recall));
        }
        event_checks += 1;
    }
    Check::new(violations == 0, format!("1000 predictions, {event_checks} events, {violations} violations"))
}

fn binary_tree() -> TaxonomyTree {
    let mut rows = Vec::new();
    for a in ["a0", "a1"] {
        for b in ["b0", "b1"] {
            for c in ["c0", "c1"] {
                for k in 0..2 {
                    rows.push(CatalogRow {
                        product_id: format!("{a}{b}{c}{k}"),
                        path: vec![a.into(), b.into(), c.into()],
                        description: String::new(),
                    });
                }
            }
        }
    }
    TaxonomyTree::from_rows(rows).unwrap()
}

// ---------------------------------------------------------------- synthetic suite

struct Desk {
    data: SyntheticData,
    ds: Dataset,
    emb: Embeddings,
}

fn desk() -> Desk {
    let data = generate_synthetic(&SynthConfig::default(), DATA_SEED).unwrap();
    let ds = Dataset::from_synthetic(&data, 0.8).unwrap();
    let emb = Embeddings::train(&ds, &SkipGramConfig::default()).unwrap();
    Desk { data, ds, emb }
}

const SP: Variant = Variant { model: ModelKind::Sessionpath, encoder: EncoderKind::S2pv, session: true };
const SP_NOSESSION: Variant = Variant { model: ModelKind::Sessionpath, encoder: EncoderKind::S2pv, session: false };
const MLP: Variant = Variant { model: ModelKind::Mlp, encoder: EncoderKind::S2pv, session: true };

fn run_suite(desk: &Desk) -> (SuiteReport, Duration) {
    let started = Instant::now();
    let main = SuiteConfig { variants: vec![Variant::CM, MLP, SP], ..SuiteConfig::default() };
    let ablation = SuiteConfig { variants: vec![SP_NOSESSION], fractions: vec![1.0], ..SuiteConfig::default() };
    let mut report = run_experiment_suite(&desk.ds, &desk.emb, &main);
    report.cells.extend(run_experiment_suite(&desk.ds, &desk.emb, &ablation).cells);
    (report, started.elapsed())
}

fn mean_last(report: &SuiteReport, v: Variant, fraction: f64) -> f64 {
    report.cell(v, fraction).and_then(|c| c.summary.overall_last).map(|s| s.mean).unwrap_or(f64::NAN)
}

fn synthetic_ordering(desk: &Desk, report: &SuiteReport, elapsed: Duration) -> Check {
    let failed: Vec<&str> = report.cells.iter().filter(|c| c.failed).map(|c| c.label.as_str()).collect();
    let cm = report.cell(Variant::CM, 1.0).unwrap();
    let sp = report.cell(SP, 1.0).unwrap();
    let cm_unseen: Vec<f64> = cm.summary.unseen_last.iter().chain(&cm.summary.unseen_d1).map(|s| s.mean).collect();
    let sp_unseen = sp.summary.unseen_last.map(|s| s.mean).unwrap_or(0.0);
    let a = !cm_unseen.is_empty() && cm_unseen.iter().all(|&x| x == 0.0) && sp_unseen > 0.0;

    let (s, m, c) = (mean_last(report, SP, 1.0), mean_last(report, MLP, 1.0), mean_last(report, Variant::CM, 1.0));
    let b = s >= m && m >= c;
    let ns = mean_last(report, SP_NOSESSION, 1.0);
    let c_ok = ns <= s;
    let mut d = true;
    let mut trend = Vec::new();
    for v in [Variant::CM, MLP, SP] {
        let xs: Vec<f64> = [0.1, 0.25, 1.0].iter().map(|&f| mean_last(report, v, f)).collect();
        d &= xs[0] <= xs[1] && xs[1] <= xs[2];
        trend.push(format!("{} {:.3}/{:.3}/{:.3}", v.label(), xs[0], xs[1], xs[2]));
    }
    let within = elapsed < SUITE_BUDGET;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let scale = format!("{} products, {} events", desk.data.catalog.len(), desk.data.events.len());
    let verdict = |x: bool| if x { "ok" } else { "FAILED" };
    Check::new(
        failed.is_empty() && a && b && c_ok && d && within,
        format!(
            "{scale}; (a) {} cm unseen {cm_unseen:?} sp unseen {sp_unseen:.3}; (b) {} sp {s:.3} >= mlp {m:.3} >= cm {c:.3}; \
             (c) {} nosession {ns:.3} <= sp {s:.3}; (d) {} D=last by fraction 0.1/0.25/1: {}; {:.0}s on {cores} core(s){}",
            verdict(a),
            verdict(b),
            verdict(c_ok),
            verdict(d),
            trend.join(", "),
            elapsed.as_secs_f64(),
            if within { "" } else { " over the 15 min budget" },
        ),
    )
}

fn validity(report: &SuiteReport) -> Check {
    let cell = report.cell(SP, 1.0).unwrap();
    let rates: Vec<f64> =
        cell.runs.iter().filter_map(|r| r.report.as_ref()).filter_map(|r| r.validity.rate).collect();
    let worst = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Check::new(rates.len() == cell.runs.len() && worst > 0.95, format!("sp+s2pv validity over {} seeds, min {worst:.4}", rates.len()))
}

fn prefix_sharing(report: &SuiteReport) -> String {
    let d1 = |v: Variant| report.cell(v, 0.1).and_then(|c| c.summary.overall_d1).map(|s| s.mean).unwrap_or(f64::NAN);
    format!("at 1/10 training data D=1: sp {:.3}, mlp {:.3}", d1(SP), d1(MLP))
}

// ---------------------------------------------------------------- memorization

fn memorization() -> Check {
    let (model, history) = toy::fit(&toy::two_path_toy(), 300, 1);
    let loss = *history.train_loss.last().unwrap();
    let empty: [&str; 0] = [];
    let a = model.generate("shoe", &empty).unwrap().nodes;
    let b = model.generate("lamp", &empty).unwrap().nodes;
    let pass = loss < 0.05 && a == Path::parse("a/x") && b == Path::parse("b/w") && history.train_loss.len() <= 300;
    Check::new(pass, format!("loss {loss:.4} after {} epochs, regenerated {a} and {b}", history.train_loss.len()))
}

// ---------------------------------------------------------------- determinism

fn quick_settings() -> ModelSettings {
    let mut s = ModelSettings::default();
    s.train.max_epochs = 6;
    s.train.patience = 5;
    s
}

fn determinism(desk: &Desk) -> (Check, Predictor) {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        generate_synthetic(&SynthConfig::default(), DATA_SEED).unwrap().write_to(d.path()).unwrap();
    }
    let same_bytes = [CATALOG_FILE, EVENTS_FILE, MANIFEST_FILE]
        .iter()
        .all(|f| std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap());

    let train = || train_variant(SP, &desk.ds.split.train, &desk.ds.tree, &desk.emb, &quick_settings(), 3).unwrap();
    let (m1, h1) = train();
    let (m2, h2) = train();
    let same_history = h1.is_some() && h1 == h2;
    let report = |m: &Predictor| evaluate("sp", m, &desk.ds.split, &desk.ds.tree, &DEFAULT_SWEEP).unwrap().0.without_timings();
    let same_report = report(&m1) == report(&m2);
    let epochs = h1.map(|h| h.train_loss.len()).unwrap_or(0);
    (
        Check::new(
            same_bytes && same_history && same_report,
            format!("data bytes {same_bytes}, history ({epochs} epochs) {same_history}, eval report {same_report}"),
        ),
        m1,
    )
}

// ---------------------------------------------------------------- service

fn requests(desk: &Desk) -> Vec<AugmentRequest> {
    let events = facetpath::eval::events_of(&desk.ds.split);
    let n = events.len();
    (0..1000)
        .map(|i| {
            let e = &events[i % n];
            AugmentRequest {
                session_products: e.session_products.clone(),
                candidates: vec![e.query.clone(), events[(i + 1) % n].query.clone(), events[(i * 7 + 3) % n].query.clone()],
                ct_override: (i % 5 == 0).then_some(0.9),
                model: (i % 7 == 0).then_some(ModelKind::Cm),
            }
        })
        .collect()
}

fn fresh_state(desk: &Desk, sp: &Predictor) -> Arc<AppState> {
    let cm = train_variant(Variant::CM, &desk.ds.split.train, &desk.ds.tree, &desk.emb, &quick_settings(), 0).unwrap().0;
    let state = AppState::new(ServiceConfig::default());
    state.install(ArtifactSet {
        tree: desk.ds.tree.clone(),
        models: BTreeMap::from([(ModelKind::Cm, cm), (ModelKind::Sessionpath, sp.clone())]),
        default_model: ModelKind::Sessionpath,
        default_ct: DEFAULT_CT,
        trace: None,
        sweep_cts: DEFAULT_SWEEP.to_vec(),
    });
    state
}

async fn post(state: &Arc<AppState>, req: &AugmentRequest) -> (Value, Duration) {
    let body = serde_json::to_vec(&serde_json::json!({
        "session_products": req.session_products,
        "candidates": req.candidates,
        "ct_override": req.ct_override,
        "model": req.model,
    }))
    .unwrap();
    let started = Instant::now();
    let resp = router(state.clone())
        .oneshot(Request::post("/augment").header("content-type", "application/json").body(Body::from(body)).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let elapsed = started.elapsed();
    assert!(status.is_success(), "{status}: {}", String::from_utf8_lossy(&bytes));
    (serde_json::from_slice(&bytes).unwrap(), elapsed)
}

fn strip_latency(mut v: Value) -> Value {
    for p in v["predictions"].as_array_mut().into_iter().flatten() {
        p.as_object_mut().unwrap().remove("latency_us");
    }
    v
}

fn service_contract(desk: &Desk, sp: &Predictor) -> Check {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    rt.block_on(async {
        let reqs = requests(desk);
        let recorded = fresh_state(desk, sp);
        let mut first = Vec::with_capacity(reqs.len());
        let mut latencies = Vec::with_capacity(reqs.len());
        for r in &reqs {
            let (v, t) = post(&recorded, r).await;
            first.push(strip_latency(v));
            latencies.push(t);
        }
        let replay = fresh_state(desk, sp);
        let mut mismatches = 0;
        for (r, want) in reqs.iter().zip(&first) {
            mismatches += usize::from(strip_latency(post(&replay, r).await.0) != *want);
        }

        let probe = fresh_state(desk, sp);
        let mut req = reqs.iter().find(|r| r.session_products.len() >= 3 && r.model.is_none()).unwrap().clone();
        let (a, _) = post(&probe, &req).await;
        req.session_products.rotate_left(1);
        let (b, _) = post(&probe, &req).await;
        let hits = b["predictions"].as_array().unwrap().iter().all(|p| p["cache_hit"] == Value::Bool(true));
        let permuted_ok = hits && strip_latency(a.clone())["predictions"].as_array().unwrap().len() == req.candidates.len();
        let same_paths = a["predictions"]
            .as_array()
            .unwrap()
            .iter()
            .zip(b["predictions"].as_array().unwrap())
            .all(|(x, y)| x["path"] == y["path"]);

        latencies.sort();
        let p99 = latencies[(latencies.len() * 99).div_ceil(100) - 1];
        let pass = mismatches == 0 && permuted_ok && same_paths && p99 < Duration::from_millis(50);
        Check::new(
            pass,
            format!(
                "{} replayed, {mismatches} mismatches; permuted session hit {}; cold p99 {:.2} ms",
                reqs.len(),
                hits && same_paths,
                p99.as_secs_f64() * 1e3
            ),
        )
    })
}

// ---------------------------------------------------------------- driver

fn main() {
    // run only when selected, so filtered `cargo test foo` invocations stay quick
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let mut results: Vec<(&str, Check)> = Vec::new();
    let mut report = |name: &'static str, c: Check| {
        println!("{} {name}: {}", if c.pass { "PASS" } else { "FAIL" }, c.detail);
        results.push((name, c));
    };
    report("worked-example", worked_example());
    report("gini", gini_correctness());
    report("gradient-checks", gradient_checks());
    report("truncation-monotonicity", truncation_monotonicity());
    report("memorization", memorization());

    let desk = desk();
    let (det, sp) = determinism(&desk);
    report("determinism", det);
    report("service-contract", service_contract(&desk, &sp));

    let (suite, elapsed) = run_suite(&desk);
    let saved = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-suite.json");
    std::fs::write(&saved, serde_json::to_vec_pretty(&suite).unwrap()).unwrap();
    report("synthetic-ordering", synthetic_ordering(&desk, &suite, elapsed));
    report("validity", validity(&suite));
    println!("INFO prefix-sharing: {}", prefix_sharing(&suite));
    println!("{}", suite.to_table());
    println!("suite report: {}", saved.display());

    let failed: Vec<&str> = results.iter().filter(|(_, c)| !c.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
