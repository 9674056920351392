use std::collections::BTreeMap;

use super::config::ModelConfig;
use super::fusion::{extract_context, ContextExtractor, FusionCell};
use super::loss::{classification_loss, joint_loss, translation_loss, Direction, JointLossWeights};
use crate::autodiff::Var;
use crate::data::{Modality, VideoInput};
use crate::error::{Error, Result};
use crate::layers::{valid_prefix, DenseLayer, Initializer, ParamStore, Session, StackConfig};

/// The fusion network: context extractors, fusion cells and a linear
/// classifier over the concatenated joint feature. Owns its parameters.
#[derive(Debug, Clone)]
pub struct TransModality {
    pub config: ModelConfig,
    pub dims: BTreeMap<Modality, usize>,
    pub num_classes: usize,
    pub seed: u64,
    pub params: ParamStore,
    /// Modalities in joint-feature order.
    pub order: Vec<Modality>,
    pub extractors: BTreeMap<Modality, ContextExtractor>,
    pub cells: Vec<FusionCell>,
    pub classifier: DenseLayer,
}

/// Graph handles from one forward pass over a video.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Var,
    pub features: Var,
    pub trans_losses: Vec<(Direction, Var)>,
}

/// Loss terms of one video.
#[derive(Debug, Clone)]
pub struct VideoLoss {
    pub joint: Var,
    pub cls: Var,
    pub trans: Vec<(Direction, Var)>,
    pub logits: Var,
}

impl TransModality {
    /// Tri-modal when `config.modalities` holds t, v and a (cells t↔v and
    /// t↔a sharing the text extractor); bi-modal for two modalities, the
    /// first being the forward source.
    pub fn new(config: &ModelConfig, dims: &BTreeMap<Modality, usize>, num_classes: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        let dim = |m: Modality| {
            dims.get(&m).copied().filter(|&d| d > 0).ok_or_else(|| {
                Error::Config(format!("model uses modality `{m}` but the data has no `{m}` features"))
            })
        };
        let pairs: Vec<(Modality, Modality)> = if config.is_trimodal() {
            vec![(Modality::Text, Modality::Visual), (Modality::Text, Modality::Acoustic)]
        } else {
            vec![(config.modalities[0], config.modalities[1])]
        };
        let order = if config.is_trimodal() { Modality::ALL.to_vec() } else { config.modalities.clone() };

        let mut params = ParamStore::new();
        let mut init = Initializer::new(seed);
        let mut extractors = BTreeMap::new();
        for &m in &order {
            let ext = ContextExtractor::new(&mut params, &mut init, &format!("ctx_{m}"), dim(m)?, config.gru_hidden, config.d_model);
            extractors.insert(m, ext);
        }
        let stack = StackConfig {
            d_model: config.d_model,
            heads: config.heads,
            d_ff: config.d_ff,
            layers: config.layers,
            positional: config.positional,
        };
        let cells = pairs
            .iter()
            .map(|&(a, b)| FusionCell::new(&mut params, &mut init, (a, dim(a)?), (b, dim(b)?), stack, config.backward))
            .collect::<Result<Vec<_>>>()?;

        let blocks = cells.len() * (1 + usize::from(config.backward)) + order.len();
        let width = blocks * config.d_model;
        let expected = match (config.is_trimodal(), config.backward) {
            (true, true) => 7,
            (true, false) => 5,
            (false, true) => 4,
            (false, false) => 3,
        } * config.d_model;
        assert_eq!(width, expected, "joint feature width");
        let classifier = DenseLayer::new(&mut params, &mut init, "classifier", width, num_classes);

        let dims = order.iter().map(|&m| (m, dims[&m])).collect();
        Ok(TransModality { config: config.clone(), dims, num_classes, seed, params, order, extractors, cells, classifier })
    }

    pub fn classifier_input_width(&self) -> usize {
        self.classifier.d_in
    }

    /// Translation directions in loss order.
    pub fn directions(&self) -> Vec<Direction> {
        let mut dirs = Vec::new();
        for c in &self.cells {
            dirs.push(Direction::new(c.alpha, c.beta));
            if c.has_backward() {
                dirs.push(Direction::new(c.beta, c.alpha));
            }
        }
        dirs
    }

    /// Logits `[N×classes]` and the per-direction translation losses.
    /// Joint feature order: each cell's forward then backward encoding,
    /// then the contexts in modality order.
    pub fn forward(&self, s: &mut Session, video: &VideoInput) -> Result<ForwardOutput> {
        let mask = &video.mask;
        valid_prefix(mask)?;
        let mut raw = BTreeMap::new();
        let mut ctx = BTreeMap::new();
        for &m in &self.order {
            let x = video.features(m).map_err(|e| match e {
                Error::Contract(msg) if self.config.is_trimodal() => {
                    Error::Contract(format!("{msg}; use a bi-modal model (e.g. --modalities t,a) for two modalities"))
                }
                other => other,
            })?;
            let x = s.constant(x.clone());
            let d = extract_context(s, &self.extractors[&m], x, mask)?;
            raw.insert(m, x);
            ctx.insert(m, d);
        }

        let mut blocks = Vec::new();
        let mut trans_losses = Vec::new();
        for cell in &self.cells {
            let out = cell.forward(s, ctx[&cell.alpha], ctx[&cell.beta], mask)?;
            blocks.push(out.enc_fwd);
            let l = translation_loss(&mut s.graph, out.recon_fwd, raw[&cell.beta], mask)?;
            trans_losses.push((Direction::new(cell.alpha, cell.beta), l));
            if let (Some(enc_bwd), Some(recon_bwd)) = (out.enc_bwd, out.recon_bwd) {
                blocks.push(enc_bwd);
                let l = translation_loss(&mut s.graph, recon_bwd, raw[&cell.alpha], mask)?;
                trans_losses.push((Direction::new(cell.beta, cell.alpha), l));
            }
        }
        blocks.extend(self.order.iter().map(|m| ctx[m]));
        let features = s.graph.concat(&blocks, 1)?;
        let logits = self.classifier.forward(s, features)?;
        Ok(ForwardOutput { logits, features, trans_losses })
    }

    /// Joint loss of one video, averaged over its valid utterances.
    pub fn video_loss(&self, s: &mut Session, video: &VideoInput, weights: &JointLossWeights) -> Result<VideoLoss> {
        let out = self.forward(s, video)?;
        let cls = classification_loss(&mut s.graph, out.logits, &video.labels, &video.mask, &video.utterance_ids)?;
        let joint = joint_loss(&mut s.graph, &out.trans_losses, cls, weights)?;
        Ok(VideoLoss { joint, cls, trans: out.trans_losses, logits: out.logits })
    }
}
