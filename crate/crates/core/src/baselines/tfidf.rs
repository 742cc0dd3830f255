use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::sparse::SparseVector;
use crate::container::Container;
use crate::{Error, Result};

pub const TFIDF_KIND: &str = "tfidf";

/// Counts of every contiguous character substring of length
/// `n_min..=n_max`, whitespace included.
pub fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> BTreeMap<String, usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = BTreeMap::new();
    for n in n_min.max(1)..=n_max {
        if n > chars.len() {
            break;
        }
        for w in chars.windows(n) {
            *out.entry(w.iter().collect()).or_insert(0) += 1;
        }
    }
    out
}

/// Character n-gram vocabulary with smoothed inverse document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    pub vocabulary: HashMap<String, usize>,
    pub idf: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    n_min: usize,
    n_max: usize,
    vocabulary: Vec<String>,
}

impl TfidfModel {
    /// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`. Vocabulary indices follow
    /// lexicographic n-gram order.
    pub fn fit<S: AsRef<str>>(corpus: &[S], n_min: usize, n_max: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("tf-idf needs a non-empty corpus"));
        }
        if n_min == 0 || n_min > n_max {
            return Err(Error::invalid(format!("bad n-gram range {n_min}..={n_max}")));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            for gram in char_ngrams(doc.as_ref(), n_min, n_max).into_keys() {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        let n = corpus.len() as f64;
        let mut vocabulary = HashMap::with_capacity(df.len());
        let mut idf = Vec::with_capacity(df.len());
        for (i, (gram, d)) in df.into_iter().enumerate() {
            idf.push(((1.0 + n) / (1.0 + d as f64)).ln() + 1.0);
            vocabulary.insert(gram, i);
        }
        Ok(Self { vocabulary, idf, n_min, n_max })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// L2-normalized `tf * idf`; n-grams outside the vocabulary are ignored.
    pub fn transform(&self, text: &str) -> SparseVector {
        let pairs: Vec<(usize, f64)> = char_ngrams(text, self.n_min, self.n_max)
            .into_iter()
            .filter_map(|(g, tf)| self.vocabulary.get(&g).map(|&i| (i, tf as f64 * self.idf[i])))
            .collect();
        let mut v = SparseVector::from_pairs(self.dim(), pairs);
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub fn to_container(&self) -> Container {
        let mut vocab = vec![String::new(); self.dim()];
        for (g, &i) in &self.vocabulary {
            vocab[i] = g.clone();
        }
        let meta = Meta { n_min: self.n_min, n_max: self.n_max, vocabulary: vocab };
        let mut c = Container::new(TFIDF_KIND, serde_json::to_value(meta).expect("meta serializes"));
        c.push("idf", vec![self.dim()], self.idf.clone());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != TFIDF_KIND {
            return Err(Error::Container(format!("expected `{TFIDF_KIND}`, found `{}`", c.kind)));
        }
        let meta: Meta = serde_json::from_value(c.meta.clone()).map_err(|e| Error::Container(e.to_string()))?;
        let idf = c.expect("idf", &[meta.vocabulary.len()])?.to_vec();
        let vocabulary = meta.vocabulary.into_iter().enumerate().map(|(i, g)| (g, i)).collect();
        Ok(Self { vocabulary, idf, n_min: meta.n_min, n_max: meta.n_max })
    }
}
