use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis, Zip};

use super::param::{ParamArray, ParamKind};
use crate::corpus::{Label, N_CLASSES};
use crate::rng::RngStream;
use crate::{Error, Result};

pub const LN_EPS: f64 = 1e-5;

/// `y = x W + b` for every row of `x`.
pub fn dense(x: ArrayView2<f64>, w: &ParamArray, b: &ParamArray) -> Result<Array2<f64>> {
    let (fan_in, fan_out) = (w.shape[0], w.shape[1]);
    if x.ncols() != fan_in || b.len() != fan_out {
        return Err(Error::Shape(format!(
            "dense `{}`: input width {} / bias {} against weight {}x{}",
            w.name,
            x.ncols(),
            b.len(),
            fan_in,
            fan_out
        )));
    }
    let mut y = x.dot(&w.matrix());
    y += &b.vector();
    Ok(y)
}

/// Accumulates `dW += x^T dy`, `db += sum_rows(dy)` and returns `dx = dy W^T`.
pub fn dense_backward(
    x: ArrayView2<f64>,
    w: &mut ParamArray,
    b: &mut ParamArray,
    dy: ArrayView2<f64>,
) -> Array2<f64> {
    dense_param_grads(x, w, b, dy);
    dy.dot(&w.matrix().t())
}

/// Parameter half of [`dense_backward`], for layers whose input needs no gradient.
pub fn dense_param_grads(x: ArrayView2<f64>, w: &mut ParamArray, b: &mut ParamArray, dy: ArrayView2<f64>) {
    let shape = (w.shape[0], w.shape[1]);
    {
        let mut gw = ArrayViewMut2::from_shape(shape, &mut w.grad).expect("2-d weight");
        general_mat_mul(1.0, &x.t(), &dy, 1.0, &mut gw);
    }
    for (g, s) in b.grad.iter_mut().zip(dy.sum_axis(Axis(0))) {
        *g += s;
    }
}

pub fn relu(x: ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Passes gradient only where the input was strictly positive.
pub fn relu_backward(x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
    let mut dx = dy.to_owned();
    Zip::from(&mut dx).and(&x).for_each(|d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

pub struct LayerNormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

/// Row-wise normalization with the biased variance estimate.
pub fn layer_norm(x: ArrayView2<f64>, gain: &ParamArray, bias: &ParamArray, eps: f64) -> (Array2<f64>, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.to_owned();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *inv = 1.0 / (var + eps).sqrt();
        let s = *inv;
        row.mapv_inplace(|v| v * s);
    }
    let mut y = &xhat * &gain.vector();
    y += &bias.vector();
    (y, LayerNormCache { xhat, inv_std })
}

pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: &mut ParamArray,
    bias: &mut ParamArray,
    dy: ArrayView2<f64>,
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    for (g, s) in gain.grad.iter_mut().zip((&dy * &cache.xhat).sum_axis(Axis(0))) {
        *g += s;
    }
    for (g, s) in bias.grad.iter_mut().zip(dy.sum_axis(Axis(0))) {
        *g += s;
    }
    let dxhat = &dy * &gain.vector();
    let mut dx = Array2::zeros(dy.raw_dim());
    for (((mut out, dh), xh), &inv) in dx
        .rows_mut()
        .into_iter()
        .zip(dxhat.rows())
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let sum_dh = dh.sum();
        let sum_dh_xh = dh.dot(&xh);
        Zip::from(&mut out).and(&dh).and(&xh).for_each(|o, &g, &h| {
            *o = inv / d * (d * g - sum_dh - h * sum_dh_xh);
        });
    }
    dx
}

/// Inverted dropout. Returns the output and the keep/scale mask (`None`
/// when the layer is the identity).
pub fn dropout(
    x: ArrayView2<f64>,
    p: f64,
    rng: &mut RngStream,
    training: bool,
) -> Result<(Array2<f64>, Option<Array2<f64>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout rate {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((x.to_owned(), None));
    }
    let scale = 1.0 / (1.0 - p);
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || if rng.next_f64() < p { 0.0 } else { scale });
    Ok((&x * &mask, Some(mask)))
}

pub fn dropout_backward(mask: Option<&Array2<f64>>, dy: ArrayView2<f64>) -> Array2<f64> {
    match mask {
        Some(m) => &dy * m,
        None => dy.to_owned(),
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Loss `-ln p[label]` and the probabilities. The logit gradient is
/// `probs - onehot(label)`.
pub fn softmax_xent(logits: &[f64; N_CLASSES], label: Label) -> (f64, [f64; N_CLASSES]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let log_p = logits.map(|z| z - max - log_total);
    (-log_p[label.index()], log_p.map(f64::exp))
}

/// Mean cross-entropy over a batch and its gradient w.r.t. the logits.
pub fn softmax_xent_batch(logits: ArrayView2<f64>, labels: &[Label]) -> (f64, Array2<f64>) {
    let n = labels.len() as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for ((row, mut g), &label) in logits.rows().into_iter().zip(grad.rows_mut()).zip(labels) {
        let z = [row[0], row[1], row[2]];
        let (l, p) = softmax_xent(&z, label);
        loss += l;
        for c in 0..N_CLASSES {
            g[c] = (p[c] - if c == label.index() { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

/// `lambda * sum(w^2)` over weight matrices; adds `2 lambda w` to their
/// gradients.
pub fn l2_penalty(params: &mut [ParamArray], lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut penalty = 0.0;
    for p in params.iter_mut().filter(|p| p.kind == ParamKind::Weight) {
        for (g, &w) in p.grad.iter_mut().zip(&p.values) {
            penalty += w * w;
            *g += 2.0 * lambda * w;
        }
    }
    lambda * penalty
}
