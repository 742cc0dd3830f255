//! Seeded synthetic tasks with known structure, used by tests and demos.

use crate::corpus::{Dataset, Label, Question, N_CLASSES};
use crate::ensemble::ProbMatrix;
use crate::features::{random_embedding, EmbeddingTable, FEATURE_DIM};
use crate::rng::{derive_seed, hash_str, RngStream};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct BlobConfig {
    pub n_questions: usize,
    pub dim: usize,
    /// Leading coordinates that carry the class signal.
    pub informative: usize,
    /// Magnitude of each informative coordinate of a class mean.
    pub separation: f64,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self { n_questions: 900, dim: FEATURE_DIM, informative: 20, separation: 0.25, seed: 0 }
    }
}

/// Class `c` of question `i` is `i mod 3`. Each feature row is the unit-norm
/// random embedding of the question id plus the class mean, whose
/// informative coordinates are `±separation` with seeded signs.
pub fn gaussian_blobs(cfg: &BlobConfig) -> Result<(Dataset, EmbeddingTable)> {
    let mut rng = RngStream::new(cfg.seed).derive(&[0xb10b]);
    let means: Vec<Vec<f64>> = (0..N_CLASSES)
        .map(|_| (0..cfg.informative).map(|_| if rng.below(2) == 0 { cfg.separation } else { -cfg.separation }).collect())
        .collect();
    let mut questions = Vec::with_capacity(cfg.n_questions);
    let mut table = EmbeddingTable::new(cfg.dim);
    for i in 0..cfg.n_questions {
        let label = Label::ALL[i % N_CLASSES];
        let id = format!("blob{:05}", i);
        let mut row = random_embedding(&id, cfg.seed, cfg.dim);
        for (v, m) in row.iter_mut().zip(&means[label.index()]) {
            *v += *m as f32;
        }
        table.insert(&id, row)?;
        questions.push(Question {
            id,
            subject: format!("question {i}"),
            body: String::new(),
            category: "synthetic".into(),
            label: Some(label),
        });
    }
    Ok((Dataset::new("blobs", questions)?, table))
}

const FACTUAL_WORDS: &[&str] = &[
    "visa", "permit", "office", "document", "renew", "residence", "license", "fee", "ministry", "passport",
    "procedure", "deadline",
];
const OPINION_WORDS: &[&str] = &[
    "best", "recommend", "think", "prefer", "worth", "opinion", "better", "favourite", "suggest", "nicest",
    "advice", "compare",
];
const SOCIAL_WORDS: &[&str] = &[
    "hello", "party", "friends", "tonight", "anyone", "join", "chat", "weekend", "lol", "meet", "fun", "hangout",
];
const FILLER_WORDS: &[&str] = &[
    "the", "a", "in", "for", "my", "is", "to", "and", "of", "doha", "qatar", "here", "with", "on", "what", "there",
    "people", "new", "about", "day",
];

/// Short questions mixing three keywords of their class with five shared
/// filler words. Class of question `i` is `i mod 3`.
pub fn keyword_questions(n: usize, seed: u64) -> Result<Dataset> {
    let pools = [FACTUAL_WORDS, OPINION_WORDS, SOCIAL_WORDS];
    let mut rng = RngStream::new(seed).derive(&[0x7e47]);
    let mut questions = Vec::with_capacity(n);
    for i in 0..n {
        let label = Label::ALL[i % N_CLASSES];
        let pool = pools[label.index()];
        let mut words: Vec<&str> = (0..3).map(|_| pool[rng.below(pool.len())]).collect();
        words.extend((0..5).map(|_| FILLER_WORDS[rng.below(FILLER_WORDS.len())]));
        rng.shuffle(&mut words);
        questions.push(Question {
            id: format!("text{:05}", i),
            subject: words[..3].join(" "),
            body: words[3..].join(" "),
            category: "synthetic".into(),
            label: Some(label),
        });
    }
    Dataset::new("keywords", questions)
}

/// `per_class` points around each vertex of a triangle of circumradius 4,
/// isotropic noise of standard deviation `0.7`.
pub fn gaussian_2d(per_class: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = RngStream::new(seed).derive(&[0x2d]);
    let mut x = Vec::with_capacity(per_class * N_CLASSES);
    let mut y = Vec::with_capacity(per_class * N_CLASSES);
    for i in 0..per_class * N_CLASSES {
        let c = i % N_CLASSES;
        let angle = std::f64::consts::TAU * c as f64 / N_CLASSES as f64;
        x.push(vec![4.0 * angle.cos() + 0.7 * rng.normal(), 4.0 * angle.sin() + 0.7 * rng.normal()]);
        y.push(Label::ALL[c]);
    }
    (x, y)
}

/// `n` samples of width `dim` with standard normal entries and uniformly
/// random labels.
pub fn random_labels(n: usize, dim: usize, seed: u64) -> (ndarray::Array2<f64>, Vec<Label>) {
    let mut rng = RngStream::new(seed).derive(&[0x1abe1]);
    let x = ndarray::Array2::from_shape_simple_fn((n, dim), || rng.normal());
    let y = (0..n).map(|_| Label::ALL[rng.below(N_CLASSES)]).collect();
    (x, y)
}

/// Probability 1 on the gold class of every id.
pub fn perfect_probs(system: &str, ids: &[String], labels: &[Label]) -> Result<ProbMatrix> {
    let rows = labels
        .iter()
        .map(|l| {
            let mut r = [0.0; N_CLASSES];
            r[l.index()] = 1.0;
            r
        })
        .collect();
    ProbMatrix::new(system, ids.to_vec(), rows)
}

/// Rows drawn uniformly from the probability simplex, keyed by id so the
/// row of an id does not depend on its position.
pub fn uniform_probs(system: &str, ids: &[String], seed: u64) -> Result<ProbMatrix> {
    let rows = ids
        .iter()
        .map(|id| {
            let mut rng = RngStream::new(derive_seed(seed, &[hash_str(id)]));
            let e = [0; N_CLASSES].map(|_| -(1.0 - rng.next_f64()).ln());
            let s: f64 = e.iter().sum();
            e.map(|v| v / s)
        })
        .collect();
    ProbMatrix::new(system, ids.to_vec(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_seeded_and_balanced() {
        let cfg = BlobConfig { n_questions: 30, dim: 40, informative: 5, ..Default::default() };
        let (a, ta) = gaussian_blobs(&cfg).unwrap();
        let (b, tb) = gaussian_blobs(&cfg).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(ta.to_text(), tb.to_text());
        let labels = a.labels().unwrap();
        for l in Label::ALL {
            assert_eq!(labels.iter().filter(|&&m| m == l).count(), 10);
        }
        assert_eq!(ta.get("blob00000").unwrap().len(), 40);
    }

    #[test]
    fn keyword_questions_carry_their_class_words() {
        let ds = keyword_questions(9, 1).unwrap();
        for q in ds.iter() {
            let pool = [FACTUAL_WORDS, OPINION_WORDS, SOCIAL_WORDS][q.label.unwrap().index()];
            let text = q.concat_text();
            assert_eq!(text.split(' ').filter(|w| pool.contains(w)).count(), 3, "{text}");
        }
    }

    #[test]
    fn uniform_rows_are_distributions_keyed_by_id() {
        let ids: Vec<String> = (0..20).map(|i| format!("q{i}")).collect();
        let m = uniform_probs("u", &ids, 4).unwrap();
        let rev: Vec<String> = ids.iter().rev().cloned().collect();
        let r = uniform_probs("u", &rev, 4).unwrap();
        assert_eq!(m.rows[0], r.rows[19]);
        for row in &m.rows {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
