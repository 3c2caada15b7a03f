use ndarray::{ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// Input-to-output weights.
    Weight,
    /// Hidden-to-hidden weights of recurrent layers.
    Recurrent,
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamKey {
    pub layer: usize,
    pub role: Role,
}

/// A trainable tensor with its gradient accumulator and RMSProp cache.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub cache: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; n],
            grad: vec![0.0; n],
            cache: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            s => panic!("parameter of rank {} used as a matrix", s.len()),
        }
    }

    pub(crate) fn matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape(self.dims2(), &self.values).expect("parameter shape")
    }

    pub(crate) fn grad_matrix_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        let dims = self.dims2();
        ArrayViewMut2::from_shape(dims, &mut self.grad).expect("parameter shape")
    }
}
