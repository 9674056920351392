use super::params::{Initializer, ParamId, ParamStore, Session};
use crate::autodiff::{Tensor, Var};
use crate::error::{dim_err, Result};

/// Fully connected layer computing `x·W + b` row by row.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl DenseLayer {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, d_in: usize, d_out: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), init.glorot(d_in, d_out));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[d_out]));
        DenseLayer { weight, bias, d_in, d_out }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let shape = s.graph.shape(x);
        if shape.len() != 2 || shape[1] != self.d_in {
            return Err(dim_err(format!("dense layer expects [N×{}], got {:?}", self.d_in, shape)));
        }
        let w = s.param(self.weight);
        let b = s.param(self.bias);
        let xw = s.graph.matmul(x, w)?;
        s.graph.add(xw, b)
    }
}
