use serde::{Deserialize, Serialize};

use super::sparse::FeatureRow;
use crate::container::Container;
use crate::corpus::{Label, N_CLASSES};
use crate::neural::softmax;
use crate::rng::RngStream;
use crate::{Error, Result};

pub const LINEAR_KIND: &str = "linear";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearKind {
    #[serde(rename = "svm-hinge")]
    Svm,
    #[serde(rename = "logistic")]
    LogReg,
}

/// One weight vector and intercept per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub dim: usize,
    pub weights: Vec<Vec<f64>>,
    pub intercepts: [f64; N_CLASSES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { lambda: 1e-4, epochs: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { l2: 1e-4, epochs: 500 }
    }
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, dim: usize) -> Self {
        Self { kind, dim, weights: vec![vec![0.0; dim]; N_CLASSES], intercepts: [0.0; N_CLASSES] }
    }

    pub fn decision<R: FeatureRow + ?Sized>(&self, x: &R) -> [f64; N_CLASSES] {
        let mut out = self.intercepts;
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o += x.dot(w);
        }
        out
    }

    /// Softmax of the decision values, for both kinds.
    pub fn predict_proba<R: FeatureRow + ?Sized>(&self, x: &R) -> [f64; N_CLASSES] {
        let p = softmax(&self.decision(x));
        [p[0], p[1], p[2]]
    }

    pub fn predict<R: FeatureRow + ?Sized>(&self, x: &R) -> Label {
        Label::argmax(&self.decision(x))
    }

    pub fn to_container(&self) -> Container {
        let meta = serde_json::json!({ "kind": self.kind, "dim": self.dim });
        let mut c = Container::new(LINEAR_KIND, meta);
        c.push("weights", vec![N_CLASSES, self.dim], self.weights.concat());
        c.push("intercepts", vec![N_CLASSES], self.intercepts.to_vec());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != LINEAR_KIND {
            return Err(Error::Container(format!("expected `{LINEAR_KIND}`, found `{}`", c.kind)));
        }
        #[derive(Deserialize)]
        struct Meta {
            kind: LinearKind,
            dim: usize,
        }
        let meta: Meta = serde_json::from_value(c.meta.clone()).map_err(|e| Error::Container(e.to_string()))?;
        let w = c.expect("weights", &[N_CLASSES, meta.dim])?;
        let b = c.expect("intercepts", &[N_CLASSES])?;
        Ok(Self {
            kind: meta.kind,
            dim: meta.dim,
            weights: (0..N_CLASSES).map(|c| w[c * meta.dim..(c + 1) * meta.dim].to_vec()).collect(),
            intercepts: [b[0], b[1], b[2]],
        })
    }
}

fn check_training_set<R: FeatureRow>(x: &[R], y: &[Label]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let Some(first) = x.first() else {
        return Err(Error::invalid("empty training set"));
    };
    let dim = first.dim();
    if let Some(i) = x.iter().position(|r| r.dim() != dim) {
        return Err(Error::Shape(format!("row {i} has width {}, expected {dim}", x[i].dim())));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::invalid(format!("training labels are all {}", y[0])));
    }
    Ok(dim)
}

/// One-vs-rest Pegasos: for class `c` and targets `s = ±1`, each step
/// `t` draws the next row of a seeded per-epoch permutation and applies
/// `w <- (1 - 1/t) w + [s w.x < 1] s x / (lambda t)`, then projects onto the
/// ball of radius `1/sqrt(lambda)`. The intercept is a constant feature of 1
/// and is regularized with the weights.
pub fn svm_train<R: FeatureRow>(x: &[R], y: &[Label], cfg: &SvmConfig) -> Result<LinearModel> {
    let dim = check_training_set(x, y)?;
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(Error::invalid(format!("svm lambda must be positive, got {}", cfg.lambda)));
    }
    let mut model = LinearModel::zeros(LinearKind::Svm, dim);
    let root = RngStream::new(cfg.seed);
    let radius2 = 1.0 / cfg.lambda;
    for c in 0..N_CLASSES {
        // w = scale * (v, b)
        let mut v = vec![0.0; dim];
        let mut b = 0.0;
        let mut scale = 1.0;
        let mut norm2 = 0.0;
        let mut rng = root.derive(&[c as u64]);
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut t = 0usize;
        for _ in 0..cfg.epochs {
            rng.shuffle(&mut order);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (cfg.lambda * t as f64);
                let s = if y[i].index() == c { 1.0 } else { -1.0 };
                let margin = s * scale * (x[i].dot(&v) + b);
                let shrink = 1.0 - 1.0 / t as f64;
                if shrink == 0.0 {
                    v.iter_mut().for_each(|w| *w = 0.0);
                    b = 0.0;
                    scale = 1.0;
                    norm2 = 0.0;
                } else {
                    scale *= shrink;
                    norm2 *= shrink * shrink;
                }
                if margin < 1.0 {
                    let a = eta * s / scale;
                    let xv = x[i].dot(&v) + b;
                    let xx = x[i].squared_norm() + 1.0;
                    x[i].add_scaled_to(&mut v, a);
                    b += a;
                    norm2 += scale * scale * (2.0 * a * xv + a * a * xx);
                }
                if norm2 > radius2 {
                    scale *= (radius2 / norm2).sqrt();
                    norm2 = radius2;
                }
                if scale < 1e-9 {
                    v.iter_mut().for_each(|w| *w *= scale);
                    b *= scale;
                    scale = 1.0;
                }
            }
        }
        model.weights[c] = v.iter().map(|w| w * scale).collect();
        model.intercepts[c] = b * scale;
    }
    Ok(model)
}

/// Multinomial logistic regression: full-batch gradient descent on mean
/// cross-entropy plus `l2 * |W|^2` (intercepts unpenalized), with step
/// `1 / (0.5 * mean |(x, 1)|^2 + 2 * l2)`.
pub fn logreg_train<R: FeatureRow>(x: &[R], y: &[Label], cfg: &LogRegConfig) -> Result<LinearModel> {
    let dim = check_training_set(x, y)?;
    if !(cfg.l2 >= 0.0) || !cfg.l2.is_finite() {
        return Err(Error::invalid(format!("logreg l2 must be non-negative, got {}", cfg.l2)));
    }
    let n = x.len() as f64;
    let mean_sq = x.iter().map(|r| r.squared_norm() + 1.0).sum::<f64>() / n;
    let lr = 1.0 / (0.5 * mean_sq + 2.0 * cfg.l2);
    let mut model = LinearModel::zeros(LinearKind::LogReg, dim);
    let mut gw = vec![vec![0.0; dim]; N_CLASSES];
    for _ in 0..cfg.epochs {
        gw.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
        let mut gb = [0.0; N_CLASSES];
        for (row, label) in x.iter().zip(y) {
            let p = model.predict_proba(row);
            for c in 0..N_CLASSES {
                let d = (p[c] - if label.index() == c { 1.0 } else { 0.0 }) / n;
                if d != 0.0 {
                    row.add_scaled_to(&mut gw[c], d);
                }
                gb[c] += d;
            }
        }
        for c in 0..N_CLASSES {
            for (w, g) in model.weights[c].iter_mut().zip(&gw[c]) {
                *w -= lr * (g + 2.0 * cfg.l2 * *w);
            }
            model.intercepts[c] -= lr * gb[c];
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::SparseVector;

    fn two_points() -> (Vec<Vec<f64>>, Vec<Label>) {
        (vec![vec![1.0], vec![-1.0]], vec![Label::Factual, Label::Opinion])
    }

    fn accuracy<R: FeatureRow>(m: &LinearModel, x: &[R], y: &[Label]) -> f64 {
        x.iter().zip(y).filter(|(r, l)| m.predict(*r) == **l).count() as f64 / y.len() as f64
    }

    #[test]
    fn svm_separates_two_points() {
        let (x, y) = two_points();
        let m = svm_train(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn logreg_separates_two_points() {
        let (x, y) = two_points();
        let m = logreg_train(&x, &y, &LogRegConfig::default()).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![Label::Opinion; 2];
        assert!(svm_train(&x, &y, &SvmConfig::default()).is_err());
        assert!(logreg_train(&x, &y, &LogRegConfig::default()).is_err());
    }

    #[test]
    fn zero_vector_decided_by_intercepts() {
        let mut m = LinearModel::zeros(LinearKind::Svm, 2);
        m.weights[0] = vec![5.0, 5.0];
        m.intercepts = [0.1, 0.3, -0.2];
        assert_eq!(m.decision(&vec![0.0, 0.0]), m.intercepts);
        assert_eq!(m.predict(&vec![0.0, 0.0]), Label::Opinion);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LinearModel::zeros(LinearKind::LogReg, 3);
        for p in m.predict_proba(&vec![1.0, -2.0, 3.0]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_data_keeps_decision_signs() {
        let x: Vec<Vec<f64>> = vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![-2.0, -2.0], vec![1.5, 0.2], vec![0.1, 1.7]];
        let y = vec![Label::Factual, Label::Opinion, Label::Socializing, Label::Factual, Label::Opinion];
        let doubled: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<Label> = y.iter().chain(&y).copied().collect();
        let a = svm_train(&x, &y, &SvmConfig::default()).unwrap();
        let b = svm_train(&doubled, &y2, &SvmConfig::default()).unwrap();
        for r in &x {
            let (da, db) = (a.decision(r), b.decision(r));
            for c in 0..N_CLASSES {
                assert_eq!(da[c] > 0.0, db[c] > 0.0, "{r:?}: {da:?} vs {db:?}");
            }
        }
    }

    #[test]
    fn sparse_and_dense_rows_agree() {
        let dense: Vec<Vec<f64>> = vec![vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, -1.0]];
        let sparse: Vec<SparseVector> =
            dense.iter().map(|r| SparseVector::from_pairs(3, r.iter().copied().enumerate().collect())).collect();
        let y = vec![Label::Factual, Label::Opinion, Label::Socializing];
        let cfg = SvmConfig { seed: 4, ..Default::default() };
        assert_eq!(svm_train(&dense, &y, &cfg).unwrap(), svm_train(&sparse, &y, &cfg).unwrap());
        let cfg = LogRegConfig::default();
        let a = logreg_train(&dense, &y, &cfg).unwrap();
        let b = logreg_train(&sparse, &y, &cfg).unwrap();
        for (wa, wb) in a.weights.concat().iter().zip(b.weights.concat()) {
            assert!((wa - wb).abs() < 1e-12);
        }
    }

    #[test]
    fn container_round_trip() {
        let (x, y) = two_points();
        let m = logreg_train(&x, &y, &LogRegConfig { epochs: 10, ..Default::default() }).unwrap();
        let back = LinearModel::from_container(&Container::from_bytes(&m.to_container().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
