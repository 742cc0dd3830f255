//! Stacked generalization over per-question class probabilities.
//!
//! Base systems exchange [`ProbMatrix`] files:
//!
//! ```text
//! #system=<name>
//! #classes=FACTUAL,OPINION,SOCIALIZING
//! <id>\t<p0> <p1> <p2>
//! ```
//!
//! Stackers see the base matrices as [`MetaFeatures`]: one row per id
//! (sorted, so row order in the inputs never matters) holding the
//! concatenated probability rows of every system in input order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    logreg_train, rf_train, svm_train, Forest, ForestConfig, LinearModel, LogRegConfig, SvmConfig,
};
use crate::corpus::{Label, N_CLASSES};
use crate::drrnn::stratified_folds;
use crate::rng::{derive_seed, RngStream};
use crate::{Error, Result};

pub const CLASSES_HEADER: &str = "#classes=FACTUAL,OPINION,SOCIALIZING";

/// Tolerance on `|sum - 1|` below which rows are accepted unchanged.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Rows off by more than [`SUM_TOLERANCE`] but at most this are renormalized.
pub const RENORMALIZE_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    pub system: String,
    pub ids: Vec<String>,
    pub rows: Vec<[f64; N_CLASSES]>,
}

/// Checks one row; returns it, renormalized if needed, and whether it was.
fn check_row(id: &str, row: [f64; N_CLASSES]) -> std::result::Result<([f64; N_CLASSES], bool), String> {
    if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(format!("row `{id}` has a negative or non-finite value"));
    }
    let sum: f64 = row.iter().sum();
    let off = (sum - 1.0).abs();
    if off <= SUM_TOLERANCE {
        Ok((row, false))
    } else if off <= RENORMALIZE_LIMIT {
        Ok((row.map(|v| v / sum), true))
    } else {
        Err(format!("row `{id}` sums to {sum}"))
    }
}

impl ProbMatrix {
    /// Rows are validated like file rows; near-miss sums are renormalized
    /// with a warning.
    pub fn new(system: impl Into<String>, ids: Vec<String>, rows: Vec<[f64; N_CLASSES]>) -> Result<Self> {
        let system = system.into();
        if ids.len() != rows.len() {
            return Err(Error::Shape(format!("{} ids but {} rows", ids.len(), rows.len())));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        let mut checked = Vec::with_capacity(rows.len());
        for (id, row) in ids.iter().zip(rows) {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
            let (row, renormalized) = check_row(id, row).map_err(Error::invalid)?;
            if renormalized {
                log::warn!("{system}: renormalized row `{id}`");
            }
            checked.push(row);
        }
        Ok(Self { system, ids, rows: checked })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Parses the file format, also returning one warning per renormalized row.
    pub fn parse_with_warnings(text: &str) -> Result<(Self, Vec<String>)> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let system = match lines.next() {
            Some((_, l)) if l.starts_with("#system=") => l["#system=".len()..].to_string(),
            _ => return Err(Error::Parse { line: 1, msg: "expected `#system=<name>`".into() }),
        };
        match lines.next() {
            Some((_, l)) if l == CLASSES_HEADER => {}
            _ => return Err(Error::Parse { line: 2, msg: format!("expected `{CLASSES_HEADER}`") }),
        }
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        let mut warnings = Vec::new();
        for (line, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line, msg };
            let (id, rest) = l.split_once('\t').ok_or_else(|| parse_err("expected `id<TAB>p0 p1 p2`".into()))?;
            let vals = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| parse_err(format!("non-numeric value `{v}`"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != N_CLASSES {
                return Err(parse_err(format!("expected {N_CLASSES} values, found {}", vals.len())));
            }
            if !seen.insert(id.to_string()) {
                return Err(Error::DuplicateId(id.to_string()));
            }
            let (row, renormalized) = check_row(id, [vals[0], vals[1], vals[2]]).map_err(parse_err)?;
            if renormalized {
                warnings.push(format!("line {line}: renormalized row `{id}`"));
            }
            ids.push(id.to_string());
            rows.push(row);
        }
        Ok((Self { system, ids, rows }, warnings))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (m, warnings) = Self::parse_with_warnings(text)?;
        for w in warnings {
            log::warn!("{}: {w}", m.system);
        }
        Ok(m)
    }

    /// Values are written at single precision.
    pub fn to_text(&self) -> String {
        let mut s = format!("#system={}\n{CLASSES_HEADER}\n", self.system);
        for (id, r) in self.ids.iter().zip(&self.rows) {
            let _ = writeln!(s, "{id}\t{} {} {}", r[0] as f32, r[1] as f32, r[2] as f32);
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn argmax_labels(&self) -> Vec<Label> {
        self.rows.iter().map(Label::argmax).collect()
    }
}

pub fn load_prob_matrix(path: &Path) -> Result<ProbMatrix> {
    ProbMatrix::load(path)
}

pub fn save_prob_matrix(m: &ProbMatrix, path: &Path) -> Result<()> {
    m.save(path)
}

/// Aligned meta-features: `x[i]` is the concatenation of every base
/// system's row for `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaFeatures {
    pub systems: Vec<String>,
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
}

impl MetaFeatures {
    /// Fails with the sorted list of ids not covered by every base.
    pub fn build(bases: &[ProbMatrix]) -> Result<Self> {
        let Some(first) = bases.first() else {
            return Err(Error::invalid("at least one base system is required"));
        };
        let lookups: Vec<HashMap<&str, usize>> =
            bases.iter().map(|b| b.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()).collect();
        let mut all: Vec<&str> = bases.iter().flat_map(|b| b.ids.iter().map(String::as_str)).collect();
        all.sort_unstable();
        all.dedup();
        let missing: Vec<String> =
            all.iter().filter(|id| lookups.iter().any(|l| !l.contains_key(*id))).map(|s| s.to_string()).collect();
        if !missing.is_empty() {
            return Err(Error::Alignment(missing));
        }
        debug_assert_eq!(all.len(), first.len());
        let x = all
            .iter()
            .map(|id| {
                bases.iter().zip(&lookups).flat_map(|(b, l)| b.rows[l[id]]).collect::<Vec<f64>>()
            })
            .collect();
        Ok(Self {
            systems: bases.iter().map(|b| b.system.clone()).collect(),
            ids: all.into_iter().map(String::from).collect(),
            x,
        })
    }

    pub fn width(&self) -> usize {
        N_CLASSES * self.systems.len()
    }

    /// Gold label of every row; fails listing ids without one.
    pub fn labels(&self, gold: &BTreeMap<String, Label>) -> Result<Vec<Label>> {
        let missing: Vec<String> = self.ids.iter().filter(|id| !gold.contains_key(*id)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Alignment(missing));
        }
        Ok(self.ids.iter().map(|id| gold[id]).collect())
    }
}

/// Out-of-fold probabilities: each row comes from `fit_predict(train, test)`
/// called with the stratified fold holding that row as `test`.
pub fn oof_probs<F>(system: &str, ids: &[String], labels: &[Label], k: usize, seed: u64, fit_predict: F) -> Result<ProbMatrix>
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<[f64; N_CLASSES]>> + Sync,
{
    if ids.len() != labels.len() {
        return Err(Error::Shape(format!("{} ids but {} labels", ids.len(), labels.len())));
    }
    let folds = stratified_folds(labels, k, seed)?;
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> =
                folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.iter().copied()).collect();
            let probs = fit_predict(&train, &folds[f])?;
            if probs.len() != folds[f].len() {
                return Err(Error::Shape(format!("fold {f}: {} predictions for {} rows", probs.len(), folds[f].len())));
            }
            Ok(probs)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![[0.0; N_CLASSES]; ids.len()];
    for (fold, probs) in folds.iter().zip(per_fold) {
        for (&i, p) in fold.iter().zip(probs) {
            rows[i] = p;
        }
    }
    ProbMatrix::new(system, ids.to_vec(), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C2Config {
    pub n_bags: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub svm: SvmConfig,
    pub logreg: LogRegConfig,
    pub forest: ForestConfig,
}

impl Default for C2Config {
    fn default() -> Self {
        Self {
            n_bags: 10,
            bootstrap: true,
            seed: 0,
            svm: SvmConfig::default(),
            logreg: LogRegConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

/// Hard vote of three learners; a three-way split goes to the logistic
/// regression.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingEstimator {
    pub logreg: LinearModel,
    pub forest: Forest,
    pub svm: LinearModel,
}

impl VotingEstimator {
    pub fn votes(&self, x: &Vec<f64>) -> [Label; 3] {
        [self.logreg.predict(x), self.forest.predict(x), self.svm.predict(x)]
    }

    pub fn predict(&self, x: &Vec<f64>) -> Label {
        let v = self.votes(x);
        if v[1] == v[2] {
            v[1]
        } else {
            // either logreg agrees with someone or all three differ
            v[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stacker {
    /// Linear SVM over the meta-features.
    C1 { systems: Vec<String>, svm: LinearModel },
    /// Majority over bagged voting estimators, ties to the lowest class.
    C2 { systems: Vec<String>, estimators: Vec<VotingEstimator> },
}

pub fn stack_train_c1(bases: &[ProbMatrix], gold: &BTreeMap<String, Label>, cfg: &SvmConfig) -> Result<Stacker> {
    let meta = MetaFeatures::build(bases)?;
    let y = meta.labels(gold)?;
    let svm = svm_train(&meta.x, &y, cfg)?;
    Ok(Stacker::C1 { systems: meta.systems, svm })
}

pub fn stack_train_c2(bases: &[ProbMatrix], gold: &BTreeMap<String, Label>, cfg: &C2Config) -> Result<Stacker> {
    if cfg.n_bags == 0 {
        return Err(Error::invalid("n_bags must be at least 1"));
    }
    let meta = MetaFeatures::build(bases)?;
    let y = meta.labels(gold)?;
    let n = y.len();
    let estimators = (0..cfg.n_bags)
        .into_par_iter()
        .map(|b| {
            let rows: Vec<usize> = if cfg.bootstrap {
                let mut rng = RngStream::new(derive_seed(cfg.seed, &[b as u64, 0]));
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let bx: Vec<Vec<f64>> = rows.iter().map(|&i| meta.x[i].clone()).collect();
            let by: Vec<Label> = rows.iter().map(|&i| y[i]).collect();
            let forest = ForestConfig { seed: derive_seed(cfg.seed, &[b as u64, 1]), ..cfg.forest.clone() };
            let svm = SvmConfig { seed: derive_seed(cfg.seed, &[b as u64, 2]), ..cfg.svm.clone() };
            Ok(VotingEstimator {
                logreg: logreg_train(&bx, &by, &cfg.logreg)?,
                forest: rf_train(&bx, &by, &forest)?,
                svm: svm_train(&bx, &by, &svm)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Stacker::C2 { systems: meta.systems, estimators })
}

impl Stacker {
    pub fn systems(&self) -> &[String] {
        match self {
            Stacker::C1 { systems, .. } | Stacker::C2 { systems, .. } => systems,
        }
    }

    /// Class scores of one meta-feature row: SVM softmax for C1, vote
    /// fractions for C2.
    pub fn scores(&self, x: &Vec<f64>) -> [f64; N_CLASSES] {
        match self {
            Stacker::C1 { svm, .. } => svm.predict_proba(x),
            Stacker::C2 { estimators, .. } => {
                let mut votes = [0.0; N_CLASSES];
                for e in estimators {
                    votes[e.predict(x).index()] += 1.0;
                }
                votes.map(|v| v / estimators.len() as f64)
            }
        }
    }

    pub fn predict_row(&self, x: &Vec<f64>) -> Label {
        match self {
            Stacker::C1 { svm, .. } => svm.predict(x),
            Stacker::C2 { .. } => Label::argmax(&self.scores(x)),
        }
    }

    /// Predictions for every id covered by `bases`, which must list the same
    /// number of systems as at training time. Output is sorted by id.
    pub fn predict(&self, bases: &[ProbMatrix]) -> Result<(Vec<String>, Vec<Label>, Vec<[f64; N_CLASSES]>)> {
        if bases.len() != self.systems().len() {
            return Err(Error::Shape(format!(
                "stacker was trained on {} systems, got {}",
                self.systems().len(),
                bases.len()
            )));
        }
        let meta = MetaFeatures::build(bases)?;
        let labels = meta.x.iter().map(|r| self.predict_row(r)).collect();
        let scores = meta.x.iter().map(|r| self.scores(r)).collect();
        Ok((meta.ids, labels, scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("q{i:03}")).collect()
    }

    #[test]
    fn parses_two_rows_in_order() {
        let text = "#system=x\n#classes=FACTUAL,OPINION,SOCIALIZING\nb\t0.2 0.3 0.5\na\t1 0 0\n";
        let m = ProbMatrix::parse(text).unwrap();
        assert_eq!(m.system, "x");
        assert_eq!(m.ids, vec!["b", "a"]);
        assert_eq!(m.rows[1], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_rows() {
        let h = "#system=x\n#classes=FACTUAL,OPINION,SOCIALIZING\n";
        for body in ["a\t0.5 0.5 0.1\n", "a\t0.5 0.5\n", "a\t0.5 0.5 zero\n", "a\t1 0 0\na\t0 1 0\n", "a\t-0.1 0.6 0.5\n"] {
            assert!(ProbMatrix::parse(&format!("{h}{body}")).is_err(), "{body}");
        }
        assert!(ProbMatrix::parse("#system=x\n#classes=A,B,C\n").is_err());
        assert!(ProbMatrix::parse("a\t1 0 0\n").is_err());
    }

    #[test]
    fn renormalizes_near_misses_with_warning() {
        let text = "#system=x\n#classes=FACTUAL,OPINION,SOCIALIZING\na\t0.5 0.25 0.25005\nb\t0.5 0.25 0.2500001\n";
        let (m, warnings) = ProbMatrix::parse_with_warnings(text).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!((m.rows[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.rows[1], [0.5, 0.25, 0.2500001]);
    }

    #[test]
    fn save_load_round_trip_at_single_precision() {
        let mut rng = RngStream::new(1);
        let rows: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                let r = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
                let s: f64 = r.iter().sum();
                r.map(|v| v / s)
            })
            .collect();
        let m = ProbMatrix::new("sys", ids(50), rows).unwrap();
        let back = ProbMatrix::parse(&m.to_text()).unwrap();
        assert_eq!(back.ids, m.ids);
        for (a, b) in m.rows.iter().zip(&back.rows) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn meta_features_slice_back_to_rows() {
        let a = ProbMatrix::new("a", vec!["y".into(), "x".into()], vec![[1.0, 0.0, 0.0], [0.2, 0.3, 0.5]]).unwrap();
        let b = ProbMatrix::new("b", vec!["x".into(), "y".into()], vec![[0.0, 1.0, 0.0], [0.1, 0.1, 0.8]]).unwrap();
        let m = MetaFeatures::build(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.ids, vec!["x", "y"]);
        assert_eq!(m.width(), 6);
        for (i, id) in m.ids.iter().enumerate() {
            for (s, base) in [&a, &b].iter().enumerate() {
                let j = base.ids.iter().position(|v| v == id).unwrap();
                assert_eq!(&m.x[i][3 * s..3 * s + 3], &base.rows[j]);
            }
        }
    }

    #[test]
    fn misalignment_lists_missing_ids() {
        let a = ProbMatrix::new("a", vec!["x".into(), "y".into()], vec![[1.0, 0.0, 0.0]; 2]).unwrap();
        let b = ProbMatrix::new("b", vec!["x".into(), "z".into()], vec![[1.0, 0.0, 0.0]; 2]).unwrap();
        match MetaFeatures::build(&[a, b]) {
            Err(Error::Alignment(ids)) => assert_eq!(ids, vec!["y", "z"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn perfect(n: usize) -> (ProbMatrix, BTreeMap<String, Label>) {
        let ids = ids(n);
        let labels: Vec<Label> = (0..n).map(|i| Label::ALL[i % 3]).collect();
        let rows = labels.iter().map(|l| {
            let mut r = [0.0; 3];
            r[l.index()] = 1.0;
            r
        });
        let gold = ids.iter().cloned().zip(labels.iter().copied()).collect();
        (ProbMatrix::new("perfect", ids, rows.collect()).unwrap(), gold)
    }

    #[test]
    fn c1_on_perfect_base_is_perfect() {
        let (p, gold) = perfect(30);
        let s = stack_train_c1(&[p.clone()], &gold, &SvmConfig::default()).unwrap();
        let (ids, labels, _) = s.predict(&[p]).unwrap();
        for (id, l) in ids.iter().zip(labels) {
            assert_eq!(gold[id], l);
        }
    }

    #[test]
    fn c2_single_unbootstrapped_bag_is_one_voting_ensemble() {
        let (p, gold) = perfect(30);
        let cfg = C2Config { n_bags: 1, bootstrap: false, forest: ForestConfig { n_trees: 5, ..Default::default() }, ..Default::default() };
        let s = stack_train_c2(&[p.clone()], &gold, &cfg).unwrap();
        let Stacker::C2 { estimators, .. } = &s else { panic!() };
        let (_, labels, _) = s.predict(&[p.clone()]).unwrap();
        let meta = MetaFeatures::build(&[p]).unwrap();
        for (x, l) in meta.x.iter().zip(labels) {
            assert_eq!(estimators[0].predict(x), l);
        }
    }

    #[test]
    fn oof_covers_every_id_once() {
        let ids = ids(30);
        let labels: Vec<Label> = (0..30).map(|i| Label::ALL[i % 3]).collect();
        let seen = std::sync::Mutex::new(Vec::new());
        let m = oof_probs("echo", &ids, &labels, 5, 3, |train, test| {
            assert!(test.iter().all(|t| !train.contains(t)));
            seen.lock().unwrap().extend_from_slice(test);
            Ok(test.iter().map(|&i| {
                let mut r = [0.0; 3];
                r[labels[i].index()] = 1.0;
                r
            }).collect())
        })
        .unwrap();
        let mut seen = seen.into_inner().unwrap();
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
        assert_eq!(m.ids, ids);
        assert_eq!(m.argmax_labels(), labels);
        assert!(oof_probs("x", &ids[..4], &labels[..4], 5, 0, |_, t| Ok(vec![[1.0, 0.0, 0.0]; t.len()])).is_err());
    }
}
