use crate::corpus::{Dataset, Label, N_CLASSES};
use crate::rng::RngStream;
use crate::{Error, Result};

/// One learning/validation pair, as row indices into the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPair {
    pub seed_index: usize,
    pub fold_index: usize,
    pub learn: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seed-major enumeration of `seeds.len() * k` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seeds: Vec<u64>,
    pub k: usize,
    pub pairs: Vec<SplitPair>,
}

impl SplitPlan {
    pub fn from_labels(labels: &[Label], seeds: &[u64], k: usize) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::invalid("at least one split seed is required"));
        }
        let mut pairs = Vec::with_capacity(seeds.len() * k);
        for (seed_index, &seed) in seeds.iter().enumerate() {
            let folds = stratified_folds(labels, k, seed)?;
            for (fold_index, val) in folds.iter().enumerate() {
                let learn = folds
                    .iter()
                    .enumerate()
                    .filter(|&(f, _)| f != fold_index)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect::<Vec<_>>();
                let mut learn = learn;
                learn.sort_unstable();
                pairs.push(SplitPair { seed_index, fold_index, learn, val: val.clone() });
            }
        }
        Ok(Self { seeds: seeds.to_vec(), k, pairs })
    }

    /// `(learn ids, val ids)` of every pair.
    pub fn ids<'a>(&self, ds: &'a Dataset) -> Vec<(Vec<&'a str>, Vec<&'a str>)> {
        let id = |i: &usize| ds.questions[*i].id.as_str();
        self.pairs.iter().map(|p| (p.learn.iter().map(id).collect(), p.val.iter().map(id).collect())).collect()
    }
}

pub fn make_splits(ds: &Dataset, seeds: &[u64], k: usize) -> Result<SplitPlan> {
    SplitPlan::from_labels(&ds.labels()?, seeds, k)
}

/// Stratified `k`-fold partition of `0..labels.len()`.
///
/// Each class is shuffled and dealt round-robin across folds, continuing
/// the fold cursor from one class to the next, so every fold receives
/// within one sample of its share of each class and of the total. Folds are
/// returned sorted.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k = {k}; need at least 2 folds")));
    }
    if labels.len() < k {
        return Err(Error::invalid(format!("{} samples cannot fill {k} folds", labels.len())));
    }
    let mut by_class: [Vec<usize>; N_CLASSES] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::invalid(format!(
                "class {} has {} members, fewer than k = {k}",
                Label::ALL[c],
                members.len()
            )));
        }
    }
    let mut rng = RngStream::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0;
    for mut members in by_class {
        rng.shuffle(&mut members);
        for i in members {
            folds[cursor % k].push(i);
            cursor += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
