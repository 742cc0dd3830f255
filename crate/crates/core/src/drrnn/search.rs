use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hyper::HyperParams;
use super::splits::stratified_folds;
use super::train::{train_single, LabeledData};
use crate::rng::{derive_seed, RngStream};
use crate::{Error, Result};

/// Inclusive ranges. `base_lr` and `l2_lambda` are sampled log-uniformly,
/// the rest uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub base_lr: (f64, f64),
    pub l2_lambda: (f64, f64),
    pub input_dropout: (f64, f64),
    pub block_dropout: (f64, f64),
    pub n_blocks: (usize, usize),
    pub block_dim: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            base_lr: (1e-4, 1e-2),
            l2_lambda: (1e-3, 1.0),
            input_dropout: (0.0, 0.8),
            block_dropout: (0.0, 0.8),
            n_blocks: (2, 16),
            block_dim: (32, 256),
        }
    }
}

impl SearchSpace {
    /// Every range collapsed onto the values of `hp`.
    pub fn point(hp: &HyperParams) -> Self {
        Self {
            base_lr: (hp.base_lr, hp.base_lr),
            l2_lambda: (hp.l2_lambda, hp.l2_lambda),
            input_dropout: (hp.input_dropout, hp.input_dropout),
            block_dropout: (hp.block_dropout, hp.block_dropout),
            n_blocks: (hp.n_blocks, hp.n_blocks),
            block_dim: (hp.block_dim, hp.block_dim),
        }
    }

    fn validate(&self) -> Result<()> {
        let real = [
            ("base_lr", self.base_lr),
            ("l2_lambda", self.l2_lambda),
            ("input_dropout", self.input_dropout),
            ("block_dropout", self.block_dropout),
        ];
        for (name, (lo, hi)) in real {
            if !(lo <= hi) {
                return Err(Error::invalid(format!("empty search range for {name}: [{lo}, {hi}]")));
            }
        }
        for (name, (lo, hi)) in [("n_blocks", self.n_blocks), ("block_dim", self.block_dim)] {
            if lo > hi || hi == 0 {
                return Err(Error::invalid(format!("empty search range for {name}: [{lo}, {hi}]")));
            }
        }
        for (name, (lo, hi)) in [("base_lr", self.base_lr), ("l2_lambda", self.l2_lambda)] {
            if lo <= 0.0 && lo != hi {
                return Err(Error::invalid(format!("log-uniform range for {name} needs a positive lower bound")));
            }
        }
        Ok(())
    }

    fn sample(&self, base: &HyperParams, rng: &mut RngStream) -> HyperParams {
        let log_uniform = |rng: &mut RngStream, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.uniform(lo.ln(), hi.ln()).exp()
            }
        };
        let uniform = |rng: &mut RngStream, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.uniform(lo, hi) };
        let int = |rng: &mut RngStream, (lo, hi): (usize, usize)| lo + rng.below(hi - lo + 1);
        HyperParams {
            base_lr: log_uniform(rng, self.base_lr),
            l2_lambda: log_uniform(rng, self.l2_lambda),
            input_dropout: uniform(rng, self.input_dropout),
            block_dropout: uniform(rng, self.block_dropout),
            n_blocks: int(rng, self.n_blocks),
            block_dim: int(rng, self.block_dim),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_hp: HyperParams,
    pub cv_accuracy: f64,
    /// Every sampled point with its mean validation accuracy, in sample order.
    pub log: Vec<(HyperParams, f64)>,
}

/// Samples `budget` points and scores each by mean `k`-fold validation
/// accuracy on one stratified partition. Ties go to the earlier sample.
pub fn random_search(
    space: &SearchSpace,
    base: &HyperParams,
    budget: usize,
    data: &LabeledData,
    k: usize,
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(Error::invalid("search budget must be at least 1"));
    }
    space.validate()?;
    let folds = stratified_folds(&data.y, k, seed)?;
    let mut rng = RngStream::new(seed).derive(&[0x5eac]);
    let mut log = Vec::with_capacity(budget);
    for s in 0..budget {
        let hp = space.sample(base, &mut rng);
        hp.validate()?;
        let accs = (0..k)
            .into_par_iter()
            .map(|f| {
                let learn: Vec<usize> =
                    folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.iter().copied()).collect();
                let run_seed = derive_seed(seed, &[s as u64, f as u64]);
                train_single(&data.subset(&learn), &data.subset(&folds[f]), &hp, run_seed)
                    .map(|o| o.checkpoint.best_val_acc)
            })
            .collect::<Result<Vec<f64>>>()?;
        let score = accs.iter().sum::<f64>() / k as f64;
        log::info!("search sample {s}: cv accuracy {score:.4}");
        log.push((hp, score));
    }
    let (best_idx, _) = log
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bs), (i, (_, s))| if *s > bs { (i, *s) } else { (bi, bs) });
    Ok(SearchResult { best_hp: log[best_idx].0.clone(), cv_accuracy: log[best_idx].1, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use ndarray::Array2;

    fn blobs() -> LabeledData {
        let mut rng = RngStream::new(2);
        let n = 30;
        let mut x = Array2::zeros((n, 5));
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 3;
            for j in 0..5 {
                x[[i, j]] = rng.normal() * 0.3;
            }
            x[[i, c]] += 2.0;
            y.push(Label::ALL[c]);
        }
        LabeledData::new(x, y).unwrap()
    }

    fn base() -> HyperParams {
        HyperParams { input_dim: 5, max_epochs: 15, warmup_epochs: 5, ..Default::default() }
    }

    fn tiny_space() -> SearchSpace {
        SearchSpace { n_blocks: (1, 2), block_dim: (4, 8), ..Default::default() }
    }

    #[test]
    fn budget_one_returns_its_sample() {
        let r = random_search(&tiny_space(), &base(), 1, &blobs(), 3, 7).unwrap();
        assert_eq!(r.log.len(), 1);
        assert_eq!(r.best_hp, r.log[0].0);
        assert_eq!(r.cv_accuracy, r.log[0].1);
    }

    #[test]
    fn collapsed_space_returns_the_point() {
        let hp = HyperParams { block_dim: 6, n_blocks: 1, ..base() };
        let r = random_search(&SearchSpace::point(&hp), &base(), 2, &blobs(), 3, 1).unwrap();
        assert_eq!(r.best_hp, hp);
        assert!(r.log.iter().all(|(h, _)| *h == hp));
    }

    #[test]
    fn best_is_max_of_log() {
        let r = random_search(&tiny_space(), &base(), 4, &blobs(), 3, 11).unwrap();
        let max = r.log.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.cv_accuracy, max);
        let first = r.log.iter().position(|(_, s)| *s == max).unwrap();
        assert_eq!(r.best_hp, r.log[first].0);
        for (hp, _) in &r.log {
            assert!((1..=2).contains(&hp.n_blocks) && (4..=8).contains(&hp.block_dim));
            assert!(hp.base_lr >= 1e-4 && hp.base_lr <= 1e-2);
        }
    }

    #[test]
    fn empty_space_rejected() {
        let space = SearchSpace { block_dim: (10, 5), ..Default::default() };
        assert!(random_search(&space, &base(), 1, &blobs(), 3, 0).is_err());
        let space = SearchSpace { base_lr: (1e-2, 1e-4), ..Default::default() };
        assert!(random_search(&space, &base(), 1, &blobs(), 3, 0).is_err());
        assert!(random_search(&tiny_space(), &base(), 0, &blobs(), 3, 0).is_err());
    }
}
