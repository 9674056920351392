use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Primitive, Tensor, Var};
use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors, in creation order. Names follow
/// `module.layer.tensor`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.by_name.contains_key(&name), "duplicate parameter name {name}");
        let id = ParamId(self.values.len());
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Replaces a value, keeping the shape fixed.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        if value.shape() != self.values[id.0].shape() {
            return Err(dim_err(format!(
                "parameter {} has shape {:?}, got {:?}",
                self.names[id.0],
                self.values[id.0].shape(),
                value.shape()
            )));
        }
        self.values[id.0] = value;
        Ok(())
    }
}

/// Seeded Glorot-uniform initializer; biases and offsets start at zero,
/// gains at one.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn glorot(&mut self, fan_in: usize, fan_out: usize) -> Tensor {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| self.rng.random_range(-limit..=limit)).collect();
        Tensor::new(vec![fan_in, fan_out], data).expect("consistent shape")
    }
}

/// Dropout configuration for one forward pass.
#[derive(Debug)]
pub struct DropoutState {
    pub rate: f64,
    rng: ChaCha8Rng,
}

impl DropoutState {
    pub fn new(rate: f64, seed: u64) -> Self {
        DropoutState { rate, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

/// One forward/backward pass: a fresh graph bound to a parameter store.
pub struct Session<'p> {
    pub graph: Graph,
    params: &'p ParamStore,
    bound: HashMap<ParamId, Var>,
    dropout: Option<DropoutState>,
}

impl<'p> Session<'p> {
    /// Evaluation session: no dropout.
    pub fn new(params: &'p ParamStore) -> Self {
        Session { graph: Graph::new(), params, bound: HashMap::new(), dropout: None }
    }

    pub fn training(params: &'p ParamStore, dropout: DropoutState) -> Self {
        let mut s = Session::new(params);
        if dropout.rate > 0.0 {
            s.dropout = Some(dropout);
        }
        s
    }

    pub fn with_fault(mut self, fault: Option<Primitive>) -> Self {
        if let Some(p) = fault {
            self.graph.inject_fault(p);
        }
        self
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    /// Graph leaf for a parameter; repeated uses share one leaf so their
    /// gradients accumulate.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.graph.leaf(self.params.get(id).clone(), true);
        self.bound.insert(id, v);
        v
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.graph.constant(t)
    }

    /// Inverted dropout; identity outside training.
    pub fn dropout(&mut self, x: Var) -> Result<Var> {
        let Some(state) = self.dropout.as_mut() else { return Ok(x) };
        let keep = 1.0 - state.rate;
        let shape = self.graph.shape(x).to_vec();
        let n = self.graph.value(x).len();
        let mask: Vec<f64> =
            (0..n).map(|_| if state.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let mask = self.graph.constant(Tensor::new(shape, mask)?);
        self.graph.mul(x, mask)
    }

    /// Gradients of all bound parameters after `graph.backward`, indexed by
    /// parameter; unbound parameters get zeros.
    pub fn param_grads(&self) -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = self.params.values.iter().map(|t| vec![0.0; t.len()]).collect();
        for (&id, &v) in &self.bound {
            let g = self
                .graph
                .grad(v)
                .ok_or_else(|| Error::Contract("param_grads called before backward".into()))?;
            out[id.0].copy_from_slice(g);
        }
        Ok(out)
    }
}
