use ndarray::{ArrayView2, Axis};

use super::model::ModelCheckpoint;
use crate::corpus::{Label, N_CLASSES};
use crate::{Error, Result};

/// Argmax of the softmax outputs summed over `models` (ties to the lowest
/// class index), with the sums.
pub fn ensemble_predict(models: &[ModelCheckpoint], x: &[f64]) -> Result<(Label, [f64; N_CLASSES])> {
    let row = ArrayView2::from_shape((1, x.len()), x).expect("one row");
    Ok(ensemble_predict_batch(models, row)?.remove(0))
}

pub fn ensemble_predict_batch(
    models: &[ModelCheckpoint],
    x: ArrayView2<f64>,
) -> Result<Vec<(Label, [f64; N_CLASSES])>> {
    let first = models.first().ok_or_else(|| Error::invalid("ensemble has no models"))?;
    if let Some(m) = models.iter().find(|m| m.net.hp.input_dim != first.net.hp.input_dim) {
        return Err(Error::Shape(format!(
            "ensemble members disagree on input width ({} vs {})",
            m.net.hp.input_dim, first.net.hp.input_dim
        )));
    }
    let mut sums = vec![[0.0; N_CLASSES]; x.len_of(Axis(0))];
    for m in models {
        for (acc, p) in sums.iter_mut().zip(m.net.predict_proba(x)?) {
            for c in 0..N_CLASSES {
                acc[c] += p[c];
            }
        }
    }
    Ok(sums.into_iter().map(|s| (Label::argmax(&s), s)).collect())
}
