use crate::autodiff::{Tensor, Var};
use crate::data::Modality;
use crate::error::Result;
use crate::layers::{BiGruLayer, DenseLayer, Initializer, ParamStore, Session, StackConfig, TransformerStack};

/// BiGRU followed by a tanh dense projection to `d_model`.
#[derive(Debug, Clone)]
pub struct ContextExtractor {
    pub gru: BiGruLayer,
    pub dense: DenseLayer,
}

impl ContextExtractor {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, d_in: usize, d_h: usize, d_model: usize) -> Self {
        let gru = BiGruLayer::new(store, init, &format!("{name}.gru"), d_in, d_h);
        let dense = DenseLayer::new(store, init, &format!("{name}.dense"), 2 * d_h, d_model);
        ContextExtractor { gru, dense }
    }
}

/// `tanh(W·BiGRU(x) + b)` with padded rows zeroed, then dropout.
pub fn extract_context(s: &mut Session, extractor: &ContextExtractor, x: Var, mask: &[bool]) -> Result<Var> {
    let h = extractor.gru.forward(s, x, mask)?;
    let z = extractor.dense.forward(s, h)?;
    let d = s.graph.tanh(z);
    let d_model = extractor.dense.d_out;
    let keep: Vec<f64> = mask.iter().flat_map(|&m| std::iter::repeat_n(f64::from(u8::from(m)), d_model)).collect();
    let keep = s.constant(Tensor::new(vec![mask.len(), d_model], keep)?);
    let d = s.graph.mul(d, keep)?;
    s.dropout(d)
}

/// Forward translation α→β plus, optionally, backward translation β→α.
#[derive(Debug, Clone)]
pub struct FusionCell {
    pub alpha: Modality,
    pub beta: Modality,
    pub forward_transformer: TransformerStack,
    pub target_proj_forward: DenseLayer,
    pub backward_transformer: Option<TransformerStack>,
    pub target_proj_backward: Option<DenseLayer>,
}

#[derive(Debug, Clone, Copy)]
pub struct FusionCellOutput {
    pub enc_fwd: Var,
    pub dec_fwd: Var,
    pub recon_fwd: Var,
    pub enc_bwd: Option<Var>,
    pub dec_bwd: Option<Var>,
    pub recon_bwd: Option<Var>,
}

impl FusionCell {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        (alpha, d_alpha): (Modality, usize),
        (beta, d_beta): (Modality, usize),
        stack: StackConfig,
        backward: bool,
    ) -> Result<Self> {
        let name = format!("cell_{alpha}{beta}");
        let forward_transformer = TransformerStack::new(store, init, &format!("{name}.fwd"), stack)?;
        let target_proj_forward = DenseLayer::new(store, init, &format!("{name}.proj_fwd"), stack.d_model, d_beta);
        let (backward_transformer, target_proj_backward) = if backward {
            let t = TransformerStack::new(store, init, &format!("{name}.bwd"), stack)?;
            let p = DenseLayer::new(store, init, &format!("{name}.proj_bwd"), stack.d_model, d_alpha);
            (Some(t), Some(p))
        } else {
            (None, None)
        };
        Ok(FusionCell { alpha, beta, forward_transformer, target_proj_forward, backward_transformer, target_proj_backward })
    }

    pub fn has_backward(&self) -> bool {
        self.backward_transformer.is_some()
    }

    /// The backward encoder reads the forward decoder's output.
    pub fn forward(&self, s: &mut Session, d_alpha: Var, d_beta: Var, mask: &[bool]) -> Result<FusionCellOutput> {
        let enc_fwd = self.forward_transformer.encode(s, d_alpha, mask)?;
        let dec_fwd = self.forward_transformer.decode(s, d_beta, enc_fwd, mask, mask)?;
        let recon_fwd = self.target_proj_forward.forward(s, dec_fwd)?;
        let mut out =
            FusionCellOutput { enc_fwd, dec_fwd, recon_fwd, enc_bwd: None, dec_bwd: None, recon_bwd: None };
        if let (Some(bwd), Some(proj)) = (&self.backward_transformer, &self.target_proj_backward) {
            let enc_bwd = bwd.encode(s, dec_fwd, mask)?;
            let dec_bwd = bwd.decode(s, d_alpha, enc_bwd, mask, mask)?;
            out.recon_bwd = Some(proj.forward(s, dec_bwd)?);
            out.enc_bwd = Some(enc_bwd);
            out.dec_bwd = Some(dec_bwd);
        }
        Ok(out)
    }
}
