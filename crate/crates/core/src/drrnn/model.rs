use ndarray::{Array2, ArrayView2};

use super::hyper::HyperParams;
use crate::corpus::{Label, N_CLASSES};
use crate::neural::{
    dense, dense_backward, dense_param_grads, dropout, dropout_backward, l2_penalty, layer_norm,
    layer_norm_backward, relu, relu_backward, softmax, softmax_xent_batch, LayerNormCache, ParamArray,
    ParamKind, Probe, LN_EPS,
};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Parameter arrays in allocation order: input projection, blocks, output.
#[derive(Debug, Clone, PartialEq)]
pub struct DrrNet {
    pub hp: HyperParams,
    pub params: Vec<ParamArray>,
}

/// A trained network plus the bookkeeping of the run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub net: DrrNet,
    pub best_val_acc: f64,
    pub best_epoch: usize,
    /// `(seed_index, fold_index)`.
    pub split_id: (usize, usize),
}

const INPUT_W: usize = 0;
const INPUT_B: usize = 1;
const BLOCK_BASE: usize = 2;
const PER_BLOCK: usize = 4;

fn block_w(k: usize) -> usize {
    BLOCK_BASE + PER_BLOCK * k
}

fn output_w(hp: &HyperParams) -> usize {
    BLOCK_BASE + PER_BLOCK * hp.n_blocks
}

/// Zero-initialized arrays with the architecture's names and shapes.
pub(crate) fn allocate(hp: &HyperParams) -> Vec<ParamArray> {
    let d = hp.block_dim;
    let mut ps = vec![
        ParamArray::filled("input.weight", vec![hp.input_dim, d], ParamKind::Weight, 0.0),
        ParamArray::filled("input.bias", vec![d], ParamKind::Bias, 0.0),
    ];
    for k in 0..hp.n_blocks {
        ps.push(ParamArray::filled(format!("block{k}.weight"), vec![d, d], ParamKind::Weight, 0.0));
        ps.push(ParamArray::filled(format!("block{k}.bias"), vec![d], ParamKind::Bias, 0.0));
        ps.push(ParamArray::filled(format!("block{k}.ln_gain"), vec![d], ParamKind::Gain, 1.0));
        ps.push(ParamArray::filled(format!("block{k}.ln_bias"), vec![d], ParamKind::Bias, 0.0));
    }
    ps.push(ParamArray::filled("output.weight", vec![d, hp.n_classes], ParamKind::Weight, 0.0));
    ps.push(ParamArray::filled("output.bias", vec![hp.n_classes], ParamKind::Bias, 0.0));
    ps
}

/// Glorot-uniform weights, zero biases, unit layer-norm gains.
pub fn build_model(hp: &HyperParams, rng: &mut RngStream) -> Result<DrrNet> {
    hp.validate()?;
    let mut params = allocate(hp);
    for p in params.iter_mut().filter(|p| p.kind == ParamKind::Weight) {
        let limit = (6.0 / (p.shape[0] + p.shape[1]) as f64).sqrt();
        for v in &mut p.values {
            *v = rng.uniform(-limit, limit);
        }
    }
    Ok(DrrNet { hp: hp.clone(), params })
}

fn pair(params: &mut [ParamArray], i: usize) -> (&mut ParamArray, &mut ParamArray) {
    let (a, b) = params[i..].split_at_mut(1);
    (&mut a[0], &mut b[0])
}

struct BlockCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    norm: LayerNormCache,
    mask: Option<Array2<f64>>,
}

struct Cache {
    projected_input: Array2<f64>,
    blocks: Vec<BlockCache>,
    last_hidden: Array2<f64>,
}

fn run(
    hp: &HyperParams,
    params: &[ParamArray],
    x: ArrayView2<f64>,
    training: bool,
    rng: &mut RngStream,
) -> Result<(Array2<f64>, Cache)> {
    if x.ncols() != hp.input_dim {
        return Err(Error::Shape(format!("input width {} but the model expects {}", x.ncols(), hp.input_dim)));
    }
    let (x0, _) = dropout(x, hp.input_dropout, rng, training)?;
    let mut h = dense(x0.view(), &params[INPUT_W], &params[INPUT_B])?;
    let mut blocks = Vec::with_capacity(hp.n_blocks);
    for k in 0..hp.n_blocks {
        let i = block_w(k);
        let pre = dense(h.view(), &params[i], &params[i + 1])?;
        let sum = &h + &relu(pre.view());
        let (normed, norm) = layer_norm(sum.view(), &params[i + 2], &params[i + 3], LN_EPS);
        let (out, mask) = dropout(normed.view(), hp.block_dropout, rng, training)?;
        blocks.push(BlockCache { input: h, pre, norm, mask });
        h = out;
    }
    let o = output_w(hp);
    let logits = dense(h.view(), &params[o], &params[o + 1])?;
    Ok((logits, Cache { projected_input: x0, blocks, last_hidden: h }))
}

/// Accumulates gradients of mean cross-entropy plus the L2 penalty into
/// `params`; returns that total loss and the accuracy of the logits of this
/// same pass.
fn loss_and_grad(
    hp: &HyperParams,
    params: &mut [ParamArray],
    x: ArrayView2<f64>,
    labels: &[Label],
    training: bool,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let (logits, cache) = run(hp, params, x, training, rng)?;
    let hits = logits.rows().into_iter().zip(labels).filter(|(r, l)| Label::argmax(&[r[0], r[1], r[2]]) == **l).count();
    let acc = if labels.is_empty() { 0.0 } else { hits as f64 / labels.len() as f64 };
    let (loss, dlogits) = softmax_xent_batch(logits.view(), labels);
    let o = output_w(hp);
    let (w, b) = pair(params, o);
    let mut dh = dense_backward(cache.last_hidden.view(), w, b, dlogits.view());
    for (k, block) in cache.blocks.iter().enumerate().rev() {
        let i = block_w(k);
        let dnorm = dropout_backward(block.mask.as_ref(), dh.view());
        let (gain, bias) = pair(params, i + 2);
        let dsum = layer_norm_backward(&block.norm, gain, bias, dnorm.view());
        let dpre = relu_backward(block.pre.view(), dsum.view());
        let (w, b) = pair(params, i);
        dh = dsum + dense_backward(block.input.view(), w, b, dpre.view());
    }
    let (w, b) = pair(params, INPUT_W);
    dense_param_grads(cache.projected_input.view(), w, b, dh.view());
    Ok((loss + l2_penalty(params, hp.l2_lambda), acc))
}

/// Evaluation-mode objective (cross-entropy plus L2) with the ReLU on/off
/// pattern, for gradient checking.
pub fn eval_probe(hp: &HyperParams, params: &[ParamArray], x: ArrayView2<f64>, labels: &[Label]) -> Probe {
    let mut rng = RngStream::new(0);
    let (logits, cache) = run(hp, params, x, false, &mut rng).expect("probe input matches the model");
    let (xent, _) = softmax_xent_batch(logits.view(), labels);
    let l2: f64 = params
        .iter()
        .filter(|p| p.kind == ParamKind::Weight)
        .flat_map(|p| p.values.iter())
        .map(|w| w * w)
        .sum();
    let pattern = cache.blocks.iter().flat_map(|b| b.pre.iter().map(|&v| v > 0.0)).collect();
    Probe { loss: xent + hp.l2_lambda * l2, pattern }
}

impl DrrNet {
    pub fn param_count(&self) -> usize {
        self.params.iter().map(ParamArray::len).sum()
    }

    /// Logits for every row of `x`. Dropout is active only when `training`.
    pub fn forward(&self, x: ArrayView2<f64>, training: bool, rng: &mut RngStream) -> Result<Array2<f64>> {
        run(&self.hp, &self.params, x, training, rng).map(|(logits, _)| logits)
    }

    /// Evaluation-mode logits.
    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward(x, false, &mut RngStream::new(0))
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<[f64; N_CLASSES]>> {
        let logits = self.logits(x)?;
        Ok(logits
            .rows()
            .into_iter()
            .map(|r| {
                let p = softmax(r.as_slice().expect("row-major logits"));
                [p[0], p[1], p[2]]
            })
            .collect())
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        let logits = self.logits(x)?;
        Ok(logits.rows().into_iter().map(|r| Label::argmax(&[r[0], r[1], r[2]])).collect())
    }

    pub fn accuracy(&self, x: ArrayView2<f64>, labels: &[Label]) -> Result<f64> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let pred = self.predict(x)?;
        let hits = pred.iter().zip(labels).filter(|(p, g)| p == g).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Zeroes gradients, then accumulates those of the regularized loss.
    pub fn loss_and_grad(
        &mut self,
        x: ArrayView2<f64>,
        labels: &[Label],
        training: bool,
        rng: &mut RngStream,
    ) -> Result<f64> {
        self.loss_grad_accuracy(x, labels, training, rng).map(|(loss, _)| loss)
    }

    /// As [`DrrNet::loss_and_grad`], also returning the accuracy of the
    /// logits computed in that pass (with dropout when `training`).
    pub fn loss_grad_accuracy(
        &mut self,
        x: ArrayView2<f64>,
        labels: &[Label],
        training: bool,
        rng: &mut RngStream,
    ) -> Result<(f64, f64)> {
        self.params.iter_mut().for_each(ParamArray::zero_grad);
        loss_and_grad(&self.hp, &mut self.params, x, labels, training, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{grad_check, GradCheckOptions};

    fn small() -> HyperParams {
        HyperParams { input_dim: 7, block_dim: 5, n_blocks: 3, ..Default::default() }
    }

    fn inputs(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = RngStream::new(seed);
        Array2::from_shape_simple_fn((n, d), || rng.normal())
    }

    #[test]
    fn default_model_allocates_published_budget() {
        let net = build_model(&HyperParams::default(), &mut RngStream::new(1)).unwrap();
        assert_eq!(net.param_count(), 147_990);
    }

    #[test]
    fn same_seed_bit_identical() {
        let a = build_model(&small(), &mut RngStream::new(9)).unwrap();
        let b = build_model(&small(), &mut RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eval_forward_is_deterministic_and_finite() {
        let net = build_model(&small(), &mut RngStream::new(2)).unwrap();
        let x = inputs(4, 7, 3);
        let a = net.logits(x.view()).unwrap();
        let b = net.logits(x.view()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ncols(), 3);
        let z = net.logits(Array2::zeros((1, 7)).view()).unwrap();
        assert!(z.iter().all(|v| v.is_finite()));
        assert!(net.logits(Array2::zeros((1, 6)).view()).is_err());
    }

    #[test]
    fn training_forward_uses_dropout() {
        let net = build_model(&small(), &mut RngStream::new(2)).unwrap();
        let x = inputs(4, 7, 3);
        let mut rng = RngStream::new(11);
        let a = net.forward(x.view(), true, &mut rng).unwrap();
        let b = net.forward(x.view(), true, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn small_model_gradients_match_finite_differences() {
        let hp = HyperParams { l2_lambda: 0.14, ..small() };
        let mut net = build_model(&hp, &mut RngStream::new(4)).unwrap();
        let x = inputs(3, 7, 5);
        let y = vec![Label::Factual, Label::Socializing, Label::Opinion];
        net.loss_and_grad(x.view(), &y, false, &mut RngStream::new(0)).unwrap();
        let analytic: Vec<Vec<f64>> = net.params.iter().map(|p| p.grad.clone()).collect();
        let report = grad_check(
            &mut net.params,
            &analytic,
            |ps| eval_probe(&hp, ps, x.view(), &y),
            &GradCheckOptions::default(),
        );
        assert_eq!(report.checked + report.skipped_kinks, hp.param_count());
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }
}
