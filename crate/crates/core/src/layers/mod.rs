//! Parameterized layers built on the autodiff engine.

mod attention;
mod check;
mod dense;
mod gru;
mod params;
mod transformer;

pub use attention::{HeadProjection, MultiHeadAttention, MASK_BIAS};
pub use check::param_gradient_errors;
pub use dense::DenseLayer;
pub use gru::{valid_prefix, BiGruLayer, GruCell};
pub use params::{DropoutState, Initializer, ParamId, ParamStore, Session};
pub use transformer::{
    positional_encoding, DecoderLayer, EncoderLayer, FeedForward, LayerNorm, StackConfig, TransformerStack,
};

#[cfg(test)]
mod tests;
