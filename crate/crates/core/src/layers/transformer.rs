use super::attention::MultiHeadAttention;
use super::dense::DenseLayer;
use super::params::{Initializer, ParamId, ParamStore, Session};
use crate::autodiff::{Tensor, Var};
use crate::error::{dim_err, Error, Result};

/// Sinusoidal table: `PE[p, 2i] = sin(p / 10000^(2i/d))`, `PE[p, 2i+1] = cos(..)`.
pub fn positional_encoding(n: usize, d_model: usize) -> Result<Tensor> {
    if d_model % 2 != 0 {
        return Err(Error::Config(format!("positional encoding needs an even d_model, got {d_model}")));
    }
    let mut data = vec![0.0; n * d_model];
    for p in 0..n {
        for i in 0..d_model / 2 {
            let angle = p as f64 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            data[p * d_model + 2 * i] = angle.sin();
            data[p * d_model + 2 * i + 1] = angle.cos();
        }
    }
    Tensor::new(vec![n, d_model], data)
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub offset: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        LayerNorm {
            gain: store.add(format!("{name}.gain"), Tensor::full(&[d], 1.0)),
            offset: store.add(format!("{name}.offset"), Tensor::zeros(&[d])),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let (gain, offset) = (s.param(self.gain), s.param(self.offset));
        let normed = s.graph.normalize_rows(x)?;
        let scaled = s.graph.mul(normed, gain)?;
        s.graph.add(scaled, offset)
    }
}

/// Position-wise `d_model → d_ff → d_model` with a ReLU between.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub inner: DenseLayer,
    pub outer: DenseLayer,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, d_model: usize, d_ff: usize) -> Self {
        FeedForward {
            inner: DenseLayer::new(store, init, &format!("{name}.inner"), d_model, d_ff),
            outer: DenseLayer::new(store, init, &format!("{name}.outer"), d_ff, d_model),
        }
    }

    pub fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let h = self.inner.forward(s, x)?;
        let h = s.graph.relu(h);
        self.outer.forward(s, h)
    }
}

/// `LayerNorm(x + Dropout(sublayer))`.
fn residual(s: &mut Session, x: Var, sub: Var, norm: &LayerNorm) -> Result<Var> {
    let sub = s.dropout(sub)?;
    let sum = s.graph.add(x, sub)?;
    norm.forward(s, sum)
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub self_attn: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ffn: FeedForward,
    pub norm2: LayerNorm,
}

impl EncoderLayer {
    fn forward(&self, s: &mut Session, x: Var, mask: &[bool]) -> Result<Var> {
        let a = self.self_attn.forward(s, x, x, x, mask)?;
        let x = residual(s, x, a, &self.norm1)?;
        let f = self.ffn.forward(s, x)?;
        residual(s, x, f, &self.norm2)
    }
}

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    pub self_attn: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub norm2: LayerNorm,
    pub ffn: FeedForward,
    pub norm3: LayerNorm,
}

impl DecoderLayer {
    fn forward(&self, s: &mut Session, y: Var, memory: Var, tgt_mask: &[bool], mem_mask: &[bool]) -> Result<Var> {
        let a = self.self_attn.forward(s, y, y, y, tgt_mask)?;
        let y = residual(s, y, a, &self.norm1)?;
        let c = self.cross_attn.forward(s, y, memory, memory, mem_mask)?;
        let y = residual(s, y, c, &self.norm2)?;
        let f = self.ffn.forward(s, y)?;
        residual(s, y, f, &self.norm3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackConfig {
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    pub layers: usize,
    pub positional: bool,
}

/// Post-norm Transformer encoder and decoder with equal depth. The decoder
/// has no causal mask: every target position is observed.
#[derive(Debug, Clone)]
pub struct TransformerStack {
    pub encoder: Vec<EncoderLayer>,
    pub decoder: Vec<DecoderLayer>,
    pub config: StackConfig,
}

impl TransformerStack {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, config: StackConfig) -> Result<Self> {
        let StackConfig { d_model, heads, d_ff, layers, positional } = config;
        if positional && d_model % 2 != 0 {
            return Err(Error::Config(format!("positional encoding needs an even d_model, got {d_model}")));
        }
        let mut encoder = Vec::with_capacity(layers);
        for l in 0..layers {
            let p = format!("{name}.enc{l}");
            encoder.push(EncoderLayer {
                self_attn: MultiHeadAttention::new(store, init, &format!("{p}.self_attn"), d_model, heads)?,
                norm1: LayerNorm::new(store, &format!("{p}.norm1"), d_model),
                ffn: FeedForward::new(store, init, &format!("{p}.ffn"), d_model, d_ff),
                norm2: LayerNorm::new(store, &format!("{p}.norm2"), d_model),
            });
        }
        let mut decoder = Vec::with_capacity(layers);
        for l in 0..layers {
            let p = format!("{name}.dec{l}");
            decoder.push(DecoderLayer {
                self_attn: MultiHeadAttention::new(store, init, &format!("{p}.self_attn"), d_model, heads)?,
                norm1: LayerNorm::new(store, &format!("{p}.norm1"), d_model),
                cross_attn: MultiHeadAttention::new(store, init, &format!("{p}.cross_attn"), d_model, heads)?,
                norm2: LayerNorm::new(store, &format!("{p}.norm2"), d_model),
                ffn: FeedForward::new(store, init, &format!("{p}.ffn"), d_model, d_ff),
                norm3: LayerNorm::new(store, &format!("{p}.norm3"), d_model),
            });
        }
        Ok(TransformerStack { encoder, decoder, config })
    }

    fn check_width(&self, s: &Session, x: Var, what: &str, mask: &[bool]) -> Result<()> {
        let shape = s.graph.shape(x);
        if shape.len() != 2 || shape[1] != self.config.d_model {
            return Err(dim_err(format!("{what} must be [N×{}], got {:?}", self.config.d_model, shape)));
        }
        if mask.len() != shape[0] {
            return Err(dim_err(format!("{what} mask of length {} for {} rows", mask.len(), shape[0])));
        }
        Ok(())
    }

    fn with_positions(&self, s: &mut Session, x: Var) -> Result<Var> {
        if !self.config.positional {
            return Ok(x);
        }
        let n = s.graph.shape(x)[0];
        let pe = s.constant(positional_encoding(n, self.config.d_model)?);
        s.graph.add(x, pe)
    }

    pub fn encode(&self, s: &mut Session, src: Var, mask: &[bool]) -> Result<Var> {
        self.check_width(s, src, "encoder input", mask)?;
        let mut x = self.with_positions(s, src)?;
        for layer in &self.encoder {
            x = layer.forward(s, x, mask)?;
        }
        Ok(x)
    }

    pub fn decode(&self, s: &mut Session, tgt: Var, memory: Var, tgt_mask: &[bool], mem_mask: &[bool]) -> Result<Var> {
        self.check_width(s, tgt, "decoder target", tgt_mask)?;
        self.check_width(s, memory, "decoder memory", mem_mask)?;
        let mut y = self.with_positions(s, tgt)?;
        for layer in &self.decoder {
            y = layer.forward(s, y, memory, tgt_mask, mem_mask)?;
        }
        Ok(y)
    }
}
