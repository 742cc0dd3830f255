use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::hyper::HyperParams;
use super::model::{build_model, DrrNet, ModelCheckpoint};
use super::splits::SplitPlan;
use crate::corpus::Label;
use crate::neural::AdamState;
use crate::rng::{derive_seed, RngStream};
use crate::{Error, Result};

/// Feature rows with their gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub x: Array2<f64>,
    pub y: Vec<Label>,
}

impl LabeledData {
    pub fn new(x: Array2<f64>, y: Vec<Label>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!("{} feature rows but {} labels", x.nrows(), y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self { x: self.x.select(Axis(0), rows), y: rows.iter().map(|&i| self.y[i]).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation snapshot.
    pub checkpoint: ModelCheckpoint,
    /// Validation accuracy of the initialization, then after every epoch.
    pub val_trace: Vec<f64>,
    /// Regularized training loss of every epoch.
    pub loss_trace: Vec<f64>,
    /// Accuracy of every epoch's training pass, dropout included.
    pub train_trace: Vec<f64>,
    /// Parameters after the last epoch.
    pub final_net: DrrNet,
}

/// Full-batch training for up to `hp.max_epochs` epochs, one Adam step per
/// epoch, keeping the snapshot with the highest validation accuracy. The
/// initialization counts as epoch 0; ties keep the earlier snapshot.
pub fn train_single(learn: &LabeledData, val: &LabeledData, hp: &HyperParams, seed: u64) -> Result<TrainOutcome> {
    if learn.is_empty() || val.is_empty() {
        return Err(Error::invalid("learning and validation sets must be non-empty"));
    }
    let root = RngStream::new(seed);
    let mut net = build_model(hp, &mut root.derive(&[0]))?;
    let mut dropout_rng = root.derive(&[1]);
    let schedule = hp.schedule();

    let acc0 = net.accuracy(val.x.view(), &val.y)?;
    let mut best = (net.params.clone(), acc0, 0usize);
    let mut val_trace = vec![acc0];
    let mut loss_trace = Vec::with_capacity(hp.max_epochs);
    let mut train_trace = Vec::with_capacity(hp.max_epochs);
    let mut adam = AdamState::new(&net.params);
    for epoch in 0..hp.max_epochs {
        let (loss, train_acc) = net.loss_grad_accuracy(learn.x.view(), &learn.y, true, &mut dropout_rng)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "loss".into(), epoch });
        }
        adam.step(&mut net.params, schedule.lr_at(epoch)).map_err(|e| match e {
            Error::NonFiniteGradient(name) => Error::NonFinite { what: format!("gradient of `{name}`"), epoch },
            other => other,
        })?;
        loss_trace.push(loss);
        train_trace.push(train_acc);
        let acc = net.accuracy(val.x.view(), &val.y)?;
        val_trace.push(acc);
        if acc > best.1 {
            best = (net.params.clone(), acc, epoch + 1);
        }
    }
    let (params, best_val_acc, best_epoch) = best;
    Ok(TrainOutcome {
        checkpoint: ModelCheckpoint {
            net: DrrNet { hp: hp.clone(), params },
            best_val_acc,
            best_epoch,
            split_id: (0, 0),
        },
        val_trace,
        loss_trace,
        train_trace,
        final_net: net,
    })
}

/// Seed of the run for split `(seed_index, fold_index)`.
pub(crate) fn split_seed(global_seed: u64, seed_index: usize, fold_index: usize) -> u64 {
    derive_seed(global_seed, &[seed_index as u64, fold_index as u64])
}

/// One [`train_single`] per pair of `plan`, in plan order. Runs execute on
/// the current rayon pool; results do not depend on its size.
pub fn train_ensemble(
    data: &LabeledData,
    plan: &SplitPlan,
    hp: &HyperParams,
    global_seed: u64,
) -> Result<Vec<ModelCheckpoint>> {
    plan.pairs
        .par_iter()
        .map(|pair| {
            let wrap = |e: Error| Error::Split {
                seed_index: pair.seed_index,
                fold_index: pair.fold_index,
                source: Box::new(e),
            };
            let learn = data.subset(&pair.learn);
            let val = data.subset(&pair.val);
            let seed = split_seed(global_seed, pair.seed_index, pair.fold_index);
            let mut outcome = train_single(&learn, &val, hp, seed).map_err(wrap)?;
            outcome.checkpoint.split_id = (pair.seed_index, pair.fold_index);
            log::info!(
                "split ({}, {}): best val acc {:.4} at epoch {}",
                pair.seed_index,
                pair.fold_index,
                outcome.checkpoint.best_val_acc,
                outcome.checkpoint.best_epoch
            );
            Ok(outcome.checkpoint)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 20 points in 4 dims, class given by which axis is largest; linearly separable.
    fn separable() -> LabeledData {
        let mut rng = RngStream::new(17);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let c = i % 3;
            let mut v: Vec<f64> = (0..4).map(|_| rng.uniform(-0.3, 0.3)).collect();
            v[c] += 2.0;
            rows.extend(v);
            y.push(Label::ALL[c]);
        }
        LabeledData::new(Array2::from_shape_vec((20, 4), rows).unwrap(), y).unwrap()
    }

    fn plain(input_dim: usize) -> HyperParams {
        HyperParams {
            input_dim,
            block_dim: 8,
            n_blocks: 2,
            input_dropout: 0.0,
            block_dropout: 0.0,
            l2_lambda: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn separable_task_reaches_full_accuracy() {
        let data = separable();
        let out = train_single(&data, &data, &plain(4), 3).unwrap();
        assert_eq!(out.checkpoint.best_val_acc, 1.0);
        let max = out.val_trace.iter().copied().fold(0.0, f64::max);
        assert_eq!(out.checkpoint.best_val_acc, max);
        let first_max = out.val_trace.iter().position(|&a| a == max).unwrap();
        assert_eq!(out.checkpoint.best_epoch, first_max);
        // stored snapshot reproduces its recorded accuracy
        let again = out.checkpoint.net.accuracy(data.x.view(), &data.y).unwrap();
        assert_eq!(again, out.checkpoint.best_val_acc);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = separable();
        let hp = HyperParams { max_epochs: 0, ..plain(4) };
        let out = train_single(&data, &data, &hp, 5).unwrap();
        let init = build_model(&hp, &mut RngStream::new(5).derive(&[0])).unwrap();
        assert_eq!(out.checkpoint.net, init);
        assert_eq!(out.checkpoint.best_epoch, 0);
        assert_eq!(out.checkpoint.best_val_acc, init.accuracy(data.x.view(), &data.y).unwrap());
        assert_eq!(out.val_trace.len(), 1);
    }

    #[test]
    fn non_finite_input_is_reported_with_epoch() {
        let mut data = separable();
        data.x[[0, 0]] = f64::INFINITY;
        let hp = HyperParams { max_epochs: 3, ..plain(4) };
        match train_single(&data, &separable(), &hp, 1) {
            Err(Error::NonFinite { epoch: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
