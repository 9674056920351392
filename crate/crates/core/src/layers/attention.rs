use super::params::{Initializer, ParamId, ParamStore, Session};
use crate::autodiff::{Tensor, Var};
use crate::error::{dim_err, Error, Result};

/// Additive score bias at masked key positions.
pub const MASK_BIAS: f64 = -1e9;

#[derive(Debug, Clone)]
pub struct HeadProjection {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

/// Scaled dot-product attention with `h` heads and no projection biases.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub heads: Vec<HeadProjection>,
    pub output: ParamId,
    pub d_model: usize,
    pub d_k: usize,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        d_model: usize,
        num_heads: usize,
    ) -> Result<Self> {
        if num_heads == 0 || d_model % num_heads != 0 {
            return Err(Error::Config(format!("d_model {d_model} is not divisible by {num_heads} heads")));
        }
        let d_k = d_model / num_heads;
        let heads = (0..num_heads)
            .map(|h| HeadProjection {
                query: store.add(format!("{name}.head{h}.query"), init.glorot(d_model, d_k)),
                key: store.add(format!("{name}.head{h}.key"), init.glorot(d_model, d_k)),
                value: store.add(format!("{name}.head{h}.value"), init.glorot(d_model, d_k)),
            })
            .collect();
        let output = store.add(format!("{name}.output"), init.glorot(num_heads * d_k, d_model));
        Ok(MultiHeadAttention { heads, output, d_model, d_k })
    }

    /// `q` is `[N_q×d_model]`, `k` and `v` are `[N_k×d_model]`, and
    /// `key_mask` marks the valid keys. With no valid key every query
    /// attends to nothing and the output is zero.
    pub fn forward(&self, s: &mut Session, q: Var, k: Var, v: Var, key_mask: &[bool]) -> Result<Var> {
        let (n_q, dq) = s.graph.value(q).dims2()?;
        let (n_k, dk) = s.graph.value(k).dims2()?;
        let (n_v, dv) = s.graph.value(v).dims2()?;
        if dq != self.d_model || dk != self.d_model || dv != self.d_model || n_k != n_v {
            return Err(dim_err(format!(
                "attention over q {:?}, k {:?}, v {:?} with d_model {}",
                [n_q, dq],
                [n_k, dk],
                [n_v, dv],
                self.d_model
            )));
        }
        if key_mask.len() != n_k {
            return Err(dim_err(format!("key mask of length {} for {} keys", key_mask.len(), n_k)));
        }
        if !key_mask.iter().any(|&m| m) {
            return Ok(s.constant(Tensor::zeros(&[n_q, self.d_model])));
        }

        let bias = (!key_mask.iter().all(|&m| m)).then(|| {
            let row: Vec<f64> = key_mask.iter().map(|&m| if m { 0.0 } else { MASK_BIAS }).collect();
            Tensor::new(vec![n_q, n_k], row.repeat(n_q)).expect("consistent shape")
        });
        let bias = bias.map(|t| s.constant(t));
        let scale = 1.0 / (self.d_k as f64).sqrt();

        let mut outputs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (wq, wk, wv) = (s.param(head.query), s.param(head.key), s.param(head.value));
            let g = &mut s.graph;
            let qh = g.matmul(q, wq)?;
            let kh = g.matmul(k, wk)?;
            let vh = g.matmul(v, wv)?;
            let kt = g.transpose(kh)?;
            let raw = g.matmul(qh, kt)?;
            let mut scores = g.scale(raw, scale);
            if let Some(b) = bias {
                scores = g.add(scores, b)?;
            }
            let weights = g.softmax(scores)?;
            outputs.push(g.matmul(weights, vh)?);
        }
        let wo = s.param(self.output);
        let joined = s.graph.concat(&outputs, 1)?;
        s.graph.matmul(joined, wo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(vec![r, c], (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn indivisible_heads_is_config_error() {
        let mut store = ParamStore::new();
        let r = MultiHeadAttention::new(&mut store, &mut Initializer::new(0), "a", 6, 4);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn single_key_gets_full_weight() {
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut store, &mut Initializer::new(0), "a", 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = Session::new(&store);
        let q = s.constant(random(&mut rng, 3, 4));
        let kv = random(&mut rng, 1, 4);
        let k = s.constant(kv.clone());
        let y = mha.forward(&mut s, q, k, k, &[true]).unwrap();

        // Every query row equals concat_h(v·W_v^h)·W_o.
        let v = s.constant(kv);
        let mut heads = Vec::new();
        for h in &mha.heads {
            let wv = s.param(h.value);
            heads.push(s.graph.matmul(v, wv).unwrap());
        }
        let cat = s.graph.concat(&heads, 1).unwrap();
        let wo = s.param(mha.output);
        let expected = s.graph.matmul(cat, wo).unwrap();
        let expected = s.graph.value(expected).data().to_vec();
        for r in 0..3 {
            for (a, b) in s.graph.value(y).row(r).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attends_only_to_unmasked_key() {
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut store, &mut Initializer::new(1), "a", 4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random(&mut rng, 2, 4);
        let keys = random(&mut rng, 3, 4);
        let mut s = Session::new(&store);
        let qv = s.constant(q);
        let kv = s.constant(keys.clone());
        let masked = mha.forward(&mut s, qv, kv, kv, &[false, true, false]).unwrap();
        let only = s.constant(Tensor::new(vec![1, 4], keys.row(1).to_vec()).unwrap());
        let direct = mha.forward(&mut s, qv, only, only, &[true]).unwrap();
        for (a, b) in s.graph.value(masked).data().iter().zip(s.graph.value(direct).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn all_keys_masked_gives_zeros() {
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut store, &mut Initializer::new(1), "a", 4, 2).unwrap();
        let mut s = Session::new(&store);
        let x = s.constant(Tensor::full(&[2, 4], 0.5));
        let y = mha.forward(&mut s, x, x, x, &[false, false]).unwrap();
        assert!(s.graph.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_key_scalar_oracle() {
        // d_model = 1, one head: weights are scalars wq, wk, wv, wo.
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut store, &mut Initializer::new(0), "a", 1, 1).unwrap();
        let (wq, wk, wv, wo) = (0.8, -1.3, 0.6, 1.7);
        store.set(mha.heads[0].query, Tensor::new(vec![1, 1], vec![wq]).unwrap()).unwrap();
        store.set(mha.heads[0].key, Tensor::new(vec![1, 1], vec![wk]).unwrap()).unwrap();
        store.set(mha.heads[0].value, Tensor::new(vec![1, 1], vec![wv]).unwrap()).unwrap();
        store.set(mha.output, Tensor::new(vec![1, 1], vec![wo]).unwrap()).unwrap();
        let (q, k1, k2) = (0.9, 0.4, -1.1);

        let s1 = (q * wq) * (k1 * wk);
        let s2 = (q * wq) * (k2 * wk);
        let p1 = s1.exp() / (s1.exp() + s2.exp());
        let expected = (p1 * k1 * wv + (1.0 - p1) * k2 * wv) * wo;

        let mut s = Session::new(&store);
        let qv = s.constant(Tensor::new(vec![1, 1], vec![q]).unwrap());
        let kv = s.constant(Tensor::new(vec![2, 1], vec![k1, k2]).unwrap());
        let y = mha.forward(&mut s, qv, kv, kv, &[true, true]).unwrap();
        assert!((s.graph.value(y).item() - expected).abs() < 1e-14);
    }
}
