use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Role of a parameter array; only weights are L2-penalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Weight,
    Bias,
    Gain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamArray {
    pub fn filled(name: impl Into<String>, shape: Vec<usize>, kind: ParamKind, value: f64) -> Self {
        let n = shape.iter().product();
        Self { name: name.into(), shape, kind, values: vec![value; n], grad: vec![0.0; n] }
    }

    pub fn from_values(name: impl Into<String>, shape: Vec<usize>, kind: ParamKind, values: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), values.len(), "shape does not match values");
        let n = values.len();
        Self { name: name.into(), shape, kind, values, grad: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(rows, cols)` view of a 2-d array.
    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.shape[0], self.shape[1]), &self.values).expect("2-d parameter")
    }

    pub fn vector(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.values[..])
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}
