//! Per-question feature vectors.
//!
//! A feature vector is the concatenation of a precomputed sentence embedding
//! (512 components), the mean of pretrained word vectors over the question's
//! tokens (300), and the label distribution of the question's forum category
//! estimated on training data (3): 815 values in total.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Question, N_CLASSES};
use crate::rng::{derive_seed, hash_str, RngStream};
use crate::{Error, Result};

pub const SENTENCE_DIM: usize = 512;
pub const WORD_DIM: usize = 300;
pub const FEATURE_DIM: usize = SENTENCE_DIM + WORD_DIM + N_CLASSES;

/// Rows of fixed width keyed by question id, in file order.
///
/// Used for sentence embeddings and, with `dim = 815`, for assembled
/// feature files.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    ids: Vec<String>,
    rows: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, ids: Vec::new(), rows: Vec::new(), index: HashMap::new() }
    }

    pub fn insert(&mut self, id: &str, row: Vec<f32>) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension { id: id.to_string(), expected: self.dim, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite component in row `{id}`")));
        }
        if self.index.contains_key(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        self.index.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.rows[i].as_slice())
    }

    /// Rows for `ids` stacked into an `ids.len() x dim` matrix.
    pub fn matrix_for<S: AsRef<str>>(&self, ids: &[S]) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((ids.len(), self.dim));
        for (r, id) in ids.iter().enumerate() {
            let id = id.as_ref();
            let row = self.get(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
            for (dst, &v) in m.row_mut(r).iter_mut().zip(row) {
                *dst = v as f64;
            }
        }
        Ok(m)
    }

    pub fn parse(text: &str, expected_dim: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
        let dim: usize = header
            .strip_prefix("#dim=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("expected `#dim=<d>` header, got `{header}`") })?;
        if dim != expected_dim {
            return Err(Error::Parse { line: 1, msg: format!("table dim {dim} but {expected_dim} expected") });
        }
        let mut table = Self::new(dim);
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse { line: line_no, msg: "expected id<TAB>values".into() })?;
            let row = values
                .split_ascii_whitespace()
                .map(|v| v.parse::<f32>())
                .collect::<std::result::Result<Vec<f32>, _>>()
                .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
            table.insert(id, row)?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#dim={}\n", self.dim);
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.push_str(id);
            out.push('\t');
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_embedding_table(path: &Path, expected_dim: usize) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text, expected_dim)
}

/// Deterministic unit-norm Gaussian vector keyed by `(seed, id)`.
///
/// Stands in for sentence-encoder output wherever tests need an embedding
/// table without a pretrained model.
pub fn random_embedding(id: &str, seed: u64, dim: usize) -> Vec<f32> {
    let mut rng = RngStream::new(derive_seed(seed, &[hash_str(id)]));
    let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.iter().map(|x| (x / norm) as f32).collect()
}

pub fn random_embedding_table<S: AsRef<str>>(ids: &[S], seed: u64, dim: usize) -> Result<EmbeddingTable> {
    let mut t = EmbeddingTable::new(dim);
    for id in ids {
        t.insert(id.as_ref(), random_embedding(id.as_ref(), seed, dim))?;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordVecTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f32>>,
}

impl WordVecTable {
    /// Text format: a `count dim` header, then `token v1 .. v_dim` per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })?;
        let mut parts = header.split_ascii_whitespace().map(str::parse::<usize>);
        let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(c)), Some(Ok(d)), None) if d > 0 => (c, d),
            _ => return Err(Error::Parse { line: 1, msg: format!("expected `count dim` header, got `{header}`") }),
        };
        let mut vectors = HashMap::with_capacity(count);
        for (i, line) in lines {
            let line_no = i + 1;
            let mut parts = line.split_ascii_whitespace();
            let token = parts.next().expect("non-empty line has a token");
            let v = parts
                .map(str::parse::<f32>)
                .collect::<std::result::Result<Vec<f32>, _>>()
                .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
            if v.len() != dim {
                return Err(Error::Dimension { id: token.to_string(), expected: dim, got: v.len() });
            }
            if vectors.insert(token.to_string(), v).is_some() {
                return Err(Error::DuplicateId(token.to_string()));
            }
        }
        if vectors.len() != count {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {count} vectors, file has {}", vectors.len()),
            });
        }
        Ok(Self { dim, vectors })
    }

    /// Exact match first, then the lowercased token.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.vectors
            .get(token)
            .or_else(|| self.vectors.get(&token.to_lowercase()))
            .map(Vec::as_slice)
    }
}

pub fn load_wordvecs(path: &Path) -> Result<WordVecTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WordVecTable::parse(&text)
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '…' | '¿' | '¡' | '«' | '»')
}

/// Whitespace split, then leading and trailing punctuation characters are
/// peeled off as single-character tokens. Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let start = chars.iter().position(|&c| !is_punct(c)).unwrap_or(chars.len());
        let end = chars.iter().rposition(|&c| !is_punct(c)).map_or(start, |p| p + 1);
        tokens.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        tokens.extend(chars[end.max(start)..].iter().map(|c| c.to_string()));
    }
    tokens
}

/// Mean over the tokens found in `table`; zero vector when none match.
pub fn avg_wordvecs<S: AsRef<str>>(tokens: &[S], table: &WordVecTable) -> Vec<f64> {
    let mut sum = vec![0.0f64; table.dim];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.lookup(t.as_ref()) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += x as f64;
            }
            n += 1;
        }
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub per_category: BTreeMap<String, [f64; N_CLASSES]>,
    pub global: [f64; N_CLASSES],
}

fn normalized(counts: [usize; N_CLASSES]) -> [f64; N_CLASSES] {
    let total: usize = counts.iter().sum();
    counts.map(|c| c as f64 / total as f64)
}

impl CategoryStats {
    /// Label ratios per category, from the training split only.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("cannot fit category statistics on an empty dataset"));
        }
        let mut counts: BTreeMap<String, [usize; N_CLASSES]> = BTreeMap::new();
        let mut global = [0usize; N_CLASSES];
        for q in train.iter() {
            let label = q
                .label
                .ok_or_else(|| Error::invalid(format!("training question `{}` has no label", q.id)))?;
            counts.entry(q.category.clone()).or_default()[label.index()] += 1;
            global[label.index()] += 1;
        }
        Ok(Self {
            per_category: counts.into_iter().map(|(c, n)| (c, normalized(n))).collect(),
            global: normalized(global),
        })
    }

    /// Unseen categories fall back to the global distribution.
    pub fn lookup(&self, category: &str) -> [f64; N_CLASSES] {
        self.per_category.get(category).copied().unwrap_or(self.global)
    }
}

pub fn fit_category_stats(train: &Dataset) -> Result<CategoryStats> {
    CategoryStats::fit(train)
}

/// Builds the concatenated vector: sentence embedding, word average,
/// category statistics, in that order.
pub fn assemble(
    q: &Question,
    emb: &EmbeddingTable,
    wv: &WordVecTable,
    cs: &CategoryStats,
) -> Result<Vec<f64>> {
    let sentence = emb.get(&q.id).ok_or_else(|| Error::MissingEmbedding(q.id.clone()))?;
    let mut out = Vec::with_capacity(emb.dim + wv.dim + N_CLASSES);
    out.extend(sentence.iter().map(|&v| v as f64));
    out.extend(avg_wordvecs(&tokenize(&q.concat_text()), wv));
    out.extend(cs.lookup(&q.category));
    Ok(out)
}

/// Assembles every question of `ds` into a feature table.
pub fn featurize(
    ds: &Dataset,
    emb: &EmbeddingTable,
    wv: &WordVecTable,
    cs: &CategoryStats,
) -> Result<EmbeddingTable> {
    let mut out = EmbeddingTable::new(emb.dim + wv.dim + N_CLASSES);
    for q in ds.iter() {
        let v = assemble(q, emb, wv, cs)?;
        out.insert(&q.id, v.into_iter().map(|x| x as f32).collect())?;
    }
    Ok(out)
}
