use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Product,
    Token,
    QueryUnigram,
    /// Whole-query vectors imported from an external encoder.
    Query,
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableKind::Product => "product",
            TableKind::Token => "token",
            TableKind::QueryUnigram => "query_unigram",
            TableKind::Query => "query",
        })
    }
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "product" => TableKind::Product,
            "token" => TableKind::Token,
            "query_unigram" => TableKind::QueryUnigram,
            "query" => TableKind::Query,
            other => return Err(Error::Config(format!("unknown table kind {other:?}"))),
        })
    }
}

/// Key → dense vector map with a fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    kind: TableKind,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, kind: TableKind) -> Self {
        EmbeddingTable { dim, kind, vectors: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.vectors.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.vectors.iter()
    }

    pub fn insert(&mut self, key: impl Into<String>, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::shape(self.dim, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("non-finite embedding component".into()));
        }
        self.vectors.insert(key.into(), v);
        Ok(())
    }

    /// Mean of the vectors for the known keys; `None` when no key is known.
    pub fn mean_of<'a>(&self, keys: impl IntoIterator<Item = &'a str>) -> (Option<Vec<f64>>, usize, usize) {
        let mut sum = vec![0.0; self.dim];
        let (mut hits, mut total) = (0usize, 0usize);
        for k in keys {
            total += 1;
            if let Some(v) = self.vectors.get(k) {
                hits += 1;
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
            }
        }
        if hits == 0 {
            return (None, hits, total);
        }
        let n = hits as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        (Some(sum), hits, total)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim={} kind={}\n", self.dim, self.kind);
        for (k, v) in &self.vectors {
            out.push_str(k);
            out.push('\t');
            let nums: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&nums.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::EmptyEmbeddings)?;
        let mut dim = None;
        let mut kind = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("dim", d)) => {
                    dim = Some(d.parse::<usize>().map_err(|e| Error::Malformed { line: 1, reason: e.to_string() })?)
                }
                Some(("kind", k)) => kind = Some(k.parse::<TableKind>()?),
                _ => return Err(Error::Malformed { line: 1, reason: format!("bad header field {field:?}") }),
            }
        }
        let (Some(dim), Some(kind)) = (dim, kind) else {
            return Err(Error::Malformed { line: 1, reason: "header needs dim= and kind=".into() });
        };
        let mut table = EmbeddingTable::new(dim, kind);
        for (i, line) in lines {
            let (key, nums) =
                line.split_once('\t').ok_or_else(|| Error::Malformed { line: i + 1, reason: "missing tab".into() })?;
            let v: Vec<f64> = nums
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() })?;
            if v.len() != dim {
                return Err(Error::InconsistentDim { expected: dim, got: v.len(), line: i + 1 });
            }
            table.insert(key, v).map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() })?;
        }
        if table.is_empty() {
            return Err(Error::EmptyEmbeddings);
        }
        Ok(table)
    }

    pub fn save(&self, file: impl AsRef<FsPath>) -> Result<()> {
        let file = file.as_ref();
        fs::write(file, self.to_text()).map_err(|e| Error::io(file, e))
    }

    pub fn load(file: impl AsRef<FsPath>) -> Result<Self> {
        let file = file.as_ref();
        let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        Self::from_text(&text)
    }
}

/// Imports whole-query vectors produced by an external encoder. Every row must
/// share the first row's width; the header's `kind` is forced to `query`.
pub fn import_external_query_embeddings(file: impl AsRef<FsPath>) -> Result<EmbeddingTable> {
    let file = file.as_ref();
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyEmbeddings);
    }
    let mut t = EmbeddingTable::from_text(&text)?;
    t.kind = TableKind::Query;
    let keyed: BTreeMap<String, Vec<f64>> =
        std::mem::take(&mut t.vectors).into_iter().map(|(k, v)| (crate::text::normalize_query(&k), v)).collect();
    t.vectors = keyed;
    Ok(t)
}
