//! Category taxonomy: product paths, prefix index and the decoder node vocabulary.
//!
//! A [`Path`] is the sequence of category labels from depth 1 downwards (the
//! root is never stored). A node is identified by its label *and* its depth,
//! so `shoes` at depth 2 and `shoes` at depth 3 are different tokens.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type ProductId = String;

/// Ordered category labels, depth 1 first. Serialized as `"a/b/c"`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub struct Path(Vec<String>);

impl From<Path> for String {
    fn from(p: Path) -> String {
        p.to_string()
    }
}

impl From<String> for Path {
    fn from(s: String) -> Path {
        Path::parse(&s)
    }
}

impl Path {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Path(labels.into_iter().map(Into::into).collect())
    }

    pub fn empty() -> Self {
        Path(Vec::new())
    }

    /// Parses `sport/basketball/lebron`; surrounding whitespace per label is trimmed.
    pub fn parse(s: &str) -> Self {
        Path(
            s.split('/')
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.0.iter().enumerate().map(|(i, l)| Node::new(l.clone(), i + 1))
    }

    /// First `min(k, depth)` labels.
    pub fn truncate(&self, k: usize) -> Path {
        Path(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Path) -> bool {
        self.0.len() <= other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a == b)
    }

    pub fn push(&mut self, label: impl Into<String>) {
        self.0.push(label.into());
    }

    /// All non-empty prefixes, shortest first (the path itself included).
    pub fn prefixes(&self) -> impl Iterator<Item = Path> + '_ {
        (1..=self.0.len()).map(move |k| self.truncate(k))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("/"))
    }
}

impl From<&str> for Path {
    fn from(s: &str) -> Self {
        Path::parse(s)
    }
}

/// A category node: label scoped by its depth (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub depth: usize,
    pub label: String,
}

impl Node {
    pub fn new(label: impl Into<String>, depth: usize) -> Self {
        Node { depth, label: label.into() }
    }
}

/// Decoder token id. `START` and `END` are reserved and never part of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const START: NodeId = NodeId(0);
    pub const END: NodeId = NodeId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_sentinel(self) -> bool {
        self == Self::START || self == Self::END
    }
}

/// Deterministic token space for the decoder: START, END, then nodes sorted by (depth, label).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Node>", into = "Vec<Node>")]
pub struct NodeVocabulary {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
}

impl From<Vec<Node>> for NodeVocabulary {
    fn from(nodes: Vec<Node>) -> Self {
        NodeVocabulary::from_nodes(nodes)
    }
}

impl From<NodeVocabulary> for Vec<Node> {
    fn from(v: NodeVocabulary) -> Self {
        v.nodes
    }
}

impl NodeVocabulary {
    pub fn from_nodes(nodes: impl IntoIterator<Item = Node>) -> Self {
        let set: BTreeSet<Node> = nodes.into_iter().collect();
        let nodes: Vec<Node> = set.into_iter().collect();
        let mut v = NodeVocabulary { nodes, index: HashMap::new() };
        v.reindex();
        v
    }

    pub fn from_paths<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Self {
        Self::from_nodes(paths.into_iter().flat_map(|p| p.nodes().collect::<Vec<_>>()))
    }

    fn reindex(&mut self) {
        self.index = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NodeId(i as u32 + 2)))
            .collect();
    }

    /// Token count including the two sentinels.
    pub fn len(&self) -> usize {
        self.nodes.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn id(&self, node: &Node) -> Option<NodeId> {
        self.index.get(node).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        if id.is_sentinel() {
            None
        } else {
            self.nodes.get(id.index() - 2)
        }
    }

    /// All token ids in order, sentinels first.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.len() as u32).map(NodeId)
    }

    /// Encodes a path as node ids; `None` if any node is unknown.
    pub fn encode(&self, path: &Path) -> Option<Vec<NodeId>> {
        path.nodes().map(|n| self.id(&n)).collect()
    }

    /// Stable digest of the ordering; checkpoints refuse to load on mismatch.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.nodes {
            h.update(n.depth.to_le_bytes());
            h.update(n.label.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogRow {
    pub product_id: ProductId,
    pub path: Vec<String>,
    #[serde(default)]
    pub description: String,
}

/// Immutable product → path index with prefix/children lookup.
#[derive(Debug, Clone, Default)]
pub struct TaxonomyTree {
    product_to_path: HashMap<ProductId, Path>,
    descriptions: HashMap<ProductId, String>,
    children: HashMap<Path, BTreeSet<String>>,
    prefixes: HashSet<Path>,
    max_depth: usize,
}

impl TaxonomyTree {
    pub fn from_rows(rows: impl IntoIterator<Item = CatalogRow>) -> Result<Self> {
        let mut tree = TaxonomyTree::default();
        for row in rows {
            tree.insert(row)?;
        }
        if tree.product_to_path.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        Ok(tree)
    }

    fn insert(&mut self, row: CatalogRow) -> Result<()> {
        if row.path.is_empty() || row.path.iter().any(|l| l.trim().is_empty() || l.contains('/')) {
            return Err(Error::InvalidPath(row.path.join("/")));
        }
        if self.product_to_path.contains_key(&row.product_id) {
            return Err(Error::DuplicateProduct(row.product_id));
        }
        let path = Path::new(row.path);
        self.max_depth = self.max_depth.max(path.depth());
        for k in 0..path.depth() {
            let parent = path.truncate(k);
            self.children.entry(parent).or_default().insert(path.labels()[k].clone());
        }
        self.prefixes.extend(path.prefixes());
        self.descriptions.insert(row.product_id.clone(), row.description);
        self.product_to_path.insert(row.product_id, path);
        Ok(())
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn len(&self) -> usize {
        self.product_to_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.product_to_path.is_empty()
    }

    pub fn path_of(&self, product: &str) -> Option<&Path> {
        self.product_to_path.get(product)
    }

    pub fn description_of(&self, product: &str) -> Option<&str> {
        self.descriptions.get(product).map(String::as_str)
    }

    pub fn contains(&self, product: &str) -> bool {
        self.product_to_path.contains_key(product)
    }

    /// Labels directly below `prefix` (the empty path addresses the root).
    pub fn children(&self, prefix: &Path) -> Option<&BTreeSet<String>> {
        self.children.get(prefix)
    }

    /// Products sorted by id, for deterministic iteration.
    pub fn products(&self) -> Vec<(&ProductId, &Path)> {
        let mut v: Vec<_> = self.product_to_path.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    /// Distinct full paths in sorted order.
    pub fn full_paths(&self) -> BTreeSet<Path> {
        self.product_to_path.values().cloned().collect()
    }

    /// True iff `path` is a (non-empty) prefix of some product's path.
    pub fn is_valid_path(&self, path: &Path) -> bool {
        self.prefixes.contains(path)
    }

    pub fn node_vocabulary(&self) -> NodeVocabulary {
        NodeVocabulary::from_paths(self.product_to_path.values())
    }

    /// Product count per full path, sorted by path.
    pub fn path_counts(&self) -> BTreeMap<Path, usize> {
        let mut m = BTreeMap::new();
        for p in self.product_to_path.values() {
            *m.entry(p.clone()).or_insert(0) += 1;
        }
        m
    }
}

pub fn truncate(path: &Path, k: usize) -> Path {
    path.truncate(k)
}

/// Reads the JSON Lines catalog.
pub fn load_catalog(file: impl AsRef<FsPath>) -> Result<TaxonomyTree> {
    let file = file.as_ref();
    let reader = BufReader::new(File::open(file).map_err(|e| Error::io(file, e))?);
    let mut tree = TaxonomyTree::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(file, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: CatalogRow = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() })?;
        tree.insert(row).map_err(|e| match e {
            Error::InvalidPath(p) => Error::Malformed { line: i + 1, reason: format!("invalid path {p:?}") },
            other => other,
        })?;
    }
    if tree.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    Ok(tree)
}

pub fn write_catalog(file: impl AsRef<FsPath>, rows: &[CatalogRow]) -> Result<()> {
    use std::io::Write;
    let file = file.as_ref();
    let mut w = std::io::BufWriter::new(File::create(file).map_err(|e| Error::io(file, e))?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(file, e))?;
    }
    w.flush().map_err(|e| Error::io(file, e))?;
    Ok(())
}
