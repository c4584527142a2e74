//! Deterministic synthetic shop: taxonomy, catalog descriptions, browsing sessions
//! and search events with clicks.
//!
//! Sessions pick a top-level category (skewed, so one category is the majority)
//! and, with probability `session_coherence`, browse only inside it; otherwise the
//! views are forced to span at least two top-level categories. Deeper labels are
//! partially reused across parents and queries are drawn from the clicked
//! product's description, so a query alone is often ambiguous and the session
//! decides the category.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{write_events, SessionEvent};
use crate::taxonomy::{write_catalog, CatalogRow, Path};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_products: usize,
    /// Children per node at each depth; its length is the maximum depth.
    pub branching: Vec<usize>,
    pub min_depth: usize,
    /// Probability that a node at depth ≥ `min_depth` is a leaf.
    pub leaf_prob: f64,
    /// Probability that a child label reuses a label already used at the same depth.
    pub label_reuse: f64,
    pub n_brands: usize,
    pub n_sessions: usize,
    pub min_views: usize,
    pub max_views: usize,
    pub min_searches: usize,
    pub max_searches: usize,
    pub result_set_size: usize,
    pub query_noise: f64,
    pub session_coherence: f64,
    /// Within a coherent session, probability that a view/search stays in the session's subcategory.
    pub subcategory_focus: f64,
    pub extra_click_prob: f64,
    /// Zipf exponent over top-level category popularity.
    pub category_skew: f64,
    /// Zipf exponent over leaf sizes: how many products each leaf path receives.
    pub leaf_skew: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_products: 1000,
            branching: vec![6, 5, 4],
            min_depth: 2,
            leaf_prob: 0.3,
            label_reuse: 0.5,
            n_brands: 12,
            n_sessions: 3000,
            min_views: 0,
            max_views: 8,
            min_searches: 1,
            max_searches: 3,
            result_set_size: 20,
            query_noise: 0.1,
            session_coherence: 0.9,
            subcategory_focus: 0.7,
            extra_click_prob: 0.2,
            category_skew: 1.0,
            leaf_skew: 1.5,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let max_depth = self.branching.len();
        if !(2..=4).contains(&max_depth) {
            return bad("taxonomy depth must be within 2..=4");
        }
        if self.min_depth < 1 || self.min_depth > max_depth {
            return bad("min_depth out of range");
        }
        if self.branching.iter().any(|&b| b == 0) {
            return bad("branching must be positive at every depth");
        }
        if self.branching[0] > TOP_LEVEL.len() {
            return bad("too many top-level categories");
        }
        for (name, p) in [
            ("leaf_prob", self.leaf_prob),
            ("label_reuse", self.label_reuse),
            ("query_noise", self.query_noise),
            ("session_coherence", self.session_coherence),
            ("subcategory_focus", self.subcategory_focus),
            ("extra_click_prob", self.extra_click_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if self.min_views > self.max_views || self.min_searches > self.max_searches || self.max_searches == 0 {
            return bad("inverted view/search ranges");
        }
        if self.leaf_skew < 0.0 || self.category_skew < 0.0 {
            return bad("skew exponents must be non-negative");
        }
        if self.n_sessions == 0 || self.result_set_size == 0 || self.n_brands == 0 {
            return bad("n_sessions, result_set_size and n_brands must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub query: String,
    pub session_id: String,
    pub intended_path: Path,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub catalog: Vec<CatalogRow>,
    pub events: Vec<SessionEvent>,
    pub manifest: Vec<ManifestRow>,
}

impl SyntheticData {
    /// Writes `catalog.jsonl`, `events.jsonl` and `manifest.jsonl` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<FsPath>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_catalog(dir.join(CATALOG_FILE), &self.catalog)?;
        write_events(dir.join(EVENTS_FILE), &self.events)?;
        let mut buf = Vec::new();
        for m in &self.manifest {
            serde_json::to_writer(&mut buf, m)?;
            buf.push(b'\n');
        }
        let f = dir.join(MANIFEST_FILE);
        fs::write(&f, buf).map_err(|e| Error::io(&f, e))
    }
}

pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

const TOP_LEVEL: &[&str] = &[
    "sport", "fashion", "home", "garden", "toys", "outdoor", "kitchen", "beauty", "books", "music",
];
const ADJECTIVES: &[&str] = &[
    "red", "black", "light", "pro", "classic", "kids", "large", "mini", "soft", "premium", "eco", "sale",
];
const SYLLABLES: &[&str] = &[
    "ba", "ko", "ri", "ta", "mu", "ne", "lo", "vi", "sa", "du", "pe", "zo", "ka", "mi", "ru", "te",
];

struct Taxonomy {
    leaves: Vec<Path>,
}

fn word(rng: &mut ChaCha8Rng, taken: &BTreeSet<String>) -> String {
    loop {
        let n = rng.gen_range(2..=3);
        let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if !taken.contains(&w) && !TOP_LEVEL.contains(&w.as_str()) {
            return w;
        }
    }
}

fn build_taxonomy(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Taxonomy {
    let max_depth = cfg.branching.len();
    let mut all_words: BTreeSet<String> = BTreeSet::new();
    let mut used_at_depth: Vec<Vec<String>> = vec![Vec::new(); max_depth + 1];
    let mut leaves = Vec::new();
    let mut frontier: Vec<Path> = TOP_LEVEL[..cfg.branching[0]].iter().map(|l| Path::new([*l])).collect();
    for p in &frontier {
        used_at_depth[1].push(p.labels()[0].clone());
    }
    while let Some(node) = frontier.pop() {
        let depth = node.depth();
        let is_leaf = depth == max_depth || (depth >= cfg.min_depth && rng.gen_bool(cfg.leaf_prob));
        if is_leaf {
            leaves.push(node);
            continue;
        }
        let child_depth = depth + 1;
        let mut siblings: BTreeSet<String> = BTreeSet::new();
        for _ in 0..cfg.branching[depth] {
            let reusable: Vec<&String> =
                used_at_depth[child_depth].iter().filter(|l| !siblings.contains(*l)).collect();
            let label = if !reusable.is_empty() && rng.gen_bool(cfg.label_reuse) {
                (*reusable.choose(rng).unwrap()).clone()
            } else {
                let w = word(rng, &all_words);
                all_words.insert(w.clone());
                used_at_depth[child_depth].push(w.clone());
                w
            };
            siblings.insert(label.clone());
            let mut child = node.clone();
            child.push(label);
            frontier.push(child);
        }
    }
    leaves.sort();
    Taxonomy { leaves }
}

struct Product {
    id: String,
    path: Path,
    tokens: Vec<String>,
}

/// Generates a full synthetic dataset; identical `(config, seed)` ⇒ identical output.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tax = build_taxonomy(cfg, &mut rng);
    if tax.leaves.len() > cfg.n_products {
        return Err(Error::Config(format!(
            "{} leaf paths cannot be covered by {} products",
            tax.leaves.len(),
            cfg.n_products
        )));
    }

    // Brands: each top-level category owns a few, some shared with a neighbour.
    let brands: Vec<String> = {
        let mut taken = BTreeSet::new();
        (0..cfg.n_brands)
            .map(|_| {
                let w = word(&mut rng, &taken);
                taken.insert(w.clone());
                w
            })
            .collect()
    };
    let n_top = cfg.branching[0];
    let brands_of = |top: usize| -> Vec<&String> {
        brands.iter().enumerate().filter(|(i, _)| i % n_top == top || (i + 1) % n_top == top).map(|(_, b)| b).collect()
    };
    let top_index: HashMap<&str, usize> = TOP_LEVEL[..n_top].iter().enumerate().map(|(i, l)| (*l, i)).collect();

    let mut leaf_rank: Vec<usize> = (0..tax.leaves.len()).collect();
    leaf_rank.shuffle(&mut rng);
    let leaf_cdf: Vec<f64> = {
        let mut acc = 0.0;
        leaf_rank.iter().enumerate().map(|(r, _)| {
            acc += 1.0 / ((r + 1) as f64).powf(cfg.leaf_skew);
            acc
        }).collect()
    };
    let mut products = Vec::with_capacity(cfg.n_products);
    for i in 0..cfg.n_products {
        let path = if i < tax.leaves.len() {
            tax.leaves[i].clone()
        } else {
            let u = rng.gen::<f64>() * leaf_cdf[leaf_cdf.len() - 1];
            let r = leaf_cdf.partition_point(|&c| c < u).min(leaf_cdf.len() - 1);
            tax.leaves[leaf_rank[r]].clone()
        };
        let top = top_index[path.labels()[0].as_str()];
        let brand = (*brands_of(top).choose(&mut rng).unwrap()).clone();
        let adj = ADJECTIVES.choose(&mut rng).unwrap().to_string();
        let mut tokens: Vec<String> = vec![adj, brand];
        tokens.extend(path.labels().iter().skip(1).rev().cloned());
        if rng.gen_bool(0.3) {
            tokens.push(path.labels()[0].clone());
        }
        products.push(Product { id: format!("p{i:05}"), path, tokens });
    }
    products.sort_by(|a, b| a.id.cmp(&b.id));

    let by_top: Vec<Vec<usize>> = (0..n_top)
        .map(|t| products.iter().enumerate().filter(|(_, p)| top_index[p.path.labels()[0].as_str()] == t).map(|(i, _)| i).collect())
        .collect();
    let mut by_sub: BTreeMap<Path, Vec<usize>> = BTreeMap::new();
    let mut by_leaf: BTreeMap<Path, Vec<usize>> = BTreeMap::new();
    let mut by_token: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in products.iter().enumerate() {
        by_sub.entry(p.path.truncate(2)).or_default().push(i);
        by_leaf.entry(p.path.clone()).or_default().push(i);
        for t in &p.tokens {
            let v = by_token.entry(t.as_str()).or_default();
            if v.last() != Some(&i) {
                v.push(i);
            }
        }
    }
    let subs_of_top: Vec<Vec<Path>> = (0..n_top)
        .map(|t| by_sub.keys().filter(|p| top_index[p.labels()[0].as_str()] == t).cloned().collect())
        .collect();
    let noise_tokens: Vec<&str> = ADJECTIVES.iter().copied().chain(brands.iter().map(String::as_str)).collect();

    let weights: Vec<f64> = (0..n_top).map(|i| 1.0 / ((i + 1) as f64).powf(cfg.category_skew)).collect();
    let total_w: f64 = weights.iter().sum();
    let pick_top = |rng: &mut ChaCha8Rng| -> usize {
        let mut u = rng.gen::<f64>() * total_w;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        n_top - 1
    };

    let horizon_ms: i64 = 90 * 24 * 3600 * 1000;
    let mut starts: Vec<i64> = (0..cfg.n_sessions).map(|_| rng.gen_range(0..horizon_ms)).collect();
    starts.sort_unstable();

    let mut events = Vec::new();
    let mut manifest = Vec::new();
    for (s, start) in starts.into_iter().enumerate() {
        let sid = format!("s{s:06}");
        let top = pick_top(&mut rng);
        let sub = subs_of_top[top].choose(&mut rng).unwrap().clone();
        let coherent = rng.gen_bool(cfg.session_coherence);
        let n_views = rng.gen_range(cfg.min_views..=cfg.max_views);
        let n_searches = rng.gen_range(cfg.min_searches..=cfg.max_searches);

        let pick_in = |rng: &mut ChaCha8Rng, top: usize, sub: &Path| -> usize {
            if rng.gen_bool(cfg.subcategory_focus) {
                *by_sub[sub].choose(rng).unwrap()
            } else {
                *by_top[top].choose(rng).unwrap()
            }
        };

        let mut view_products: Vec<usize> = Vec::with_capacity(n_views);
        if coherent || n_top == 1 {
            for _ in 0..n_views {
                view_products.push(pick_in(&mut rng, top, &sub));
            }
        } else {
            let other = (top + rng.gen_range(1..n_top)) % n_top;
            for v in 0..n_views {
                let t = match v {
                    0 => top,
                    1 => other,
                    _ => rng.gen_range(0..n_top),
                };
                view_products.push(*by_top[t].choose(&mut rng).unwrap());
            }
        }

        // Interleave searches between views; a search may come first.
        let mut slots: Vec<Option<usize>> = view_products.iter().map(|&p| Some(p)).collect();
        for _ in 0..n_searches {
            let at = rng.gen_range(0..=slots.len());
            slots.insert(at, None);
        }

        let mut t = start;
        let mut seen: Vec<usize> = Vec::new();
        for slot in slots {
            t += rng.gen_range(5_000..120_000);
            match slot {
                Some(p) => {
                    seen.push(p);
                    events.push(SessionEvent::view(sid.clone(), t, products[p].id.clone()));
                }
                None => {
                    let target = if coherent {
                        pick_in(&mut rng, top, &sub)
                    } else if let Some(&v) = seen.choose(&mut rng) {
                        *by_top[top_index[products[v].path.labels()[0].as_str()]].choose(&mut rng).unwrap()
                    } else {
                        *by_top[top].choose(&mut rng).unwrap()
                    };
                    let prod = &products[target];
                    let n_tok = rng.gen_range(1..=3.min(prod.tokens.len()));
                    let mut idx: Vec<usize> = (0..prod.tokens.len()).collect();
                    idx.shuffle(&mut rng);
                    let mut chosen: Vec<usize> = idx[..n_tok].to_vec();
                    chosen.sort_unstable();
                    let mut q_tokens: Vec<String> = chosen.iter().map(|&i| prod.tokens[i].clone()).collect();
                    if rng.gen_bool(cfg.query_noise) {
                        let k = rng.gen_range(0..q_tokens.len());
                        q_tokens[k] = noise_tokens.choose(&mut rng).unwrap().to_string();
                    }
                    let query = q_tokens.join(" ");

                    let (result_set, clicked) = retrieve(cfg, &mut rng, &products, &by_token, &by_leaf, &q_tokens, target);
                    manifest.push(ManifestRow { query: query.clone(), session_id: sid.clone(), intended_path: prod.path.clone() });
                    events.push(SessionEvent::search(sid.clone(), t, query, result_set, clicked));
                }
            }
        }
    }

    let catalog = products
        .iter()
        .map(|p| CatalogRow { product_id: p.id.clone(), path: p.path.labels().to_vec(), description: p.tokens.join(" ") })
        .collect();
    Ok(SyntheticData { catalog, events, manifest })
}

/// Token-match retrieval: products sharing the most query tokens first, random fill after.
fn retrieve(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    products: &[Product],
    by_token: &BTreeMap<&str, Vec<usize>>,
    by_leaf: &BTreeMap<Path, Vec<usize>>,
    q_tokens: &[String],
    target: usize,
) -> (Vec<String>, Vec<String>) {
    let mut score: BTreeMap<usize, usize> = BTreeMap::new();
    for t in q_tokens {
        if let Some(ps) = by_token.get(t.as_str()) {
            for &p in ps {
                *score.entry(p).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(usize, usize)> = score.into_iter().filter(|&(p, _)| p != target).collect();
    ranked.shuffle(rng);
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    let k = cfg.result_set_size.min(products.len());
    let mut rs: Vec<usize> = vec![target];
    rs.extend(ranked.iter().map(|&(p, _)| p).take(k.saturating_sub(1)));
    while rs.len() < k {
        let p = rng.gen_range(0..products.len());
        if !rs.contains(&p) {
            rs.push(p);
        }
    }
    rs.shuffle(rng);

    let mut clicked = vec![target];
    if rng.gen_bool(cfg.extra_click_prob) {
        let same_leaf: Vec<usize> =
            rs.iter().copied().filter(|&p| p != target && by_leaf[&products[target].path].contains(&p)).collect();
        if let Some(&p) = same_leaf.choose(rng) {
            clicked.push(p);
        }
    }
    clicked.sort_by_key(|&p| rs.iter().position(|&r| r == p));
    (
        rs.iter().map(|&p| products[p].id.clone()).collect(),
        clicked.iter().map(|&p| products[p].id.clone()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::EventKind;

    fn small() -> SynthConfig {
        SynthConfig { n_products: 200, n_sessions: 100, ..SynthConfig::default() }
    }

    #[test]
    fn infeasible_config_is_rejected() {
        let cfg = SynthConfig { n_products: 5, branching: vec![4, 4, 4], leaf_prob: 0.0, ..SynthConfig::default() };
        assert!(matches!(generate_synthetic(&cfg, 1), Err(Error::Config(_))));
        let cfg = SynthConfig { branching: vec![3], ..SynthConfig::default() };
        assert!(generate_synthetic(&cfg, 1).is_err());
    }

    #[test]
    fn full_coherence_keeps_sessions_in_one_category() {
        let cfg = SynthConfig { session_coherence: 1.0, ..small() };
        let data = generate_synthetic(&cfg, 3).unwrap();
        let path: HashMap<&str, &str> =
            data.catalog.iter().map(|r| (r.product_id.as_str(), r.path[0].as_str())).collect();
        let mut tops: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in data.events.iter().filter(|e| e.kind == EventKind::View) {
            tops.entry(&e.session_id).or_default().insert(path[e.product_id.as_deref().unwrap()]);
        }
        assert!(tops.values().all(|s| s.len() == 1));
    }

    #[test]
    fn every_leaf_has_a_product_and_depths_in_range() {
        let data = generate_synthetic(&small(), 9).unwrap();
        assert!(data.catalog.iter().all(|r| (2..=3).contains(&r.path.len())));
        assert_eq!(data.catalog.len(), 200);
    }

    #[test]
    fn manifest_matches_search_events() {
        let data = generate_synthetic(&small(), 4).unwrap();
        let searches: Vec<_> = data.events.iter().filter(|e| e.kind == EventKind::Search).collect();
        assert_eq!(searches.len(), data.manifest.len());
        for (e, m) in searches.iter().zip(&data.manifest) {
            assert_eq!(e.query.as_deref(), Some(m.query.as_str()));
            assert!(e.check().is_ok());
        }
    }
}
