//! Finite-difference verification of every layer and the full model.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::autodiff::{Primitive, Tensor, Var};
use crate::data::{Modality, VideoInput};
use crate::error::Result;
use crate::layers::{
    param_gradient_errors, BiGruLayer, DenseLayer, Initializer, MultiHeadAttention, ParamStore, Session, StackConfig,
    TransformerStack,
};
use crate::model::{extract_context, ContextExtractor, FusionCell, JointLossWeights, ModelConfig, TransModality};

pub const TOLERANCE: f64 = 1e-4;
pub const FD_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupResult {
    pub group: String,
    pub parameters: usize,
    pub max_relative_error: f64,
}

impl GroupResult {
    pub fn passed(&self) -> bool {
        self.max_relative_error < TOLERANCE
    }
}

/// The architecture the gradient check uses by default: N=2, d_model=4,
/// one layer, one head, dropout off.
pub fn toy_model_config() -> ModelConfig {
    ModelConfig { d_model: 4, heads: 1, layers: 1, d_ff: 8, gru_hidden: 3, dropout: 0.0, ..ModelConfig::default() }
}

pub fn toy_dims() -> BTreeMap<Modality, usize> {
    BTreeMap::from([(Modality::Text, 4), (Modality::Visual, 3), (Modality::Acoustic, 2)])
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.sample(StandardNormal)).collect()).expect("consistent shape")
}

/// Random video with `n` utterances over `dims`.
pub fn toy_video(dims: &BTreeMap<Modality, usize>, n: usize, classes: usize, seed: u64) -> VideoInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = dims.iter().map(|(&m, &d)| (m, random(&mut rng, &[n, d]))).collect();
    VideoInput {
        video_id: "gradcheck".into(),
        utterance_ids: (0..n).map(|i| format!("gradcheck_u{i}")).collect(),
        features,
        labels: (0..n).map(|_| rng.random_range(0..classes)).collect(),
        mask: vec![true; n],
    }
}

/// Groups parameters by name: `ctx_t.gru`, `cell_tv.fwd`, `classifier`...
fn group_of(name: &str) -> String {
    let mut parts = name.split('.');
    let first = parts.next().unwrap_or(name);
    match parts.next() {
        Some(second) if first.starts_with("ctx_") || first.starts_with("cell_") => format!("{first}.{second}"),
        _ => first.to_string(),
    }
}

fn grouped(prefix: &str, store: &ParamStore, errors: Vec<(crate::layers::ParamId, f64)>) -> Vec<GroupResult> {
    let mut groups: BTreeMap<String, GroupResult> = BTreeMap::new();
    for (id, err) in errors {
        let g = format!("{prefix}/{}", group_of(store.name(id)));
        let entry = groups
            .entry(g.clone())
            .or_insert(GroupResult { group: g, parameters: 0, max_relative_error: 0.0 });
        entry.parameters += store.get(id).len();
        entry.max_relative_error = entry.max_relative_error.max(err);
    }
    groups.into_values().collect()
}

/// Weighted sum of all outputs, so every output entry gets a distinct
/// upstream gradient.
fn probe(s: &mut Session, y: Var, seed: u64) -> Result<Var> {
    let shape = s.graph.shape(y).to_vec();
    let w = random(&mut ChaCha8Rng::seed_from_u64(seed), &shape);
    let w = s.constant(w);
    let prod = s.graph.mul(y, w)?;
    Ok(s.graph.sum(prod))
}

fn layer_group(
    name: &str,
    store: &ParamStore,
    fault: Option<Primitive>,
    loss: impl Fn(&mut Session) -> Result<Var>,
) -> Result<GroupResult> {
    let errors = param_gradient_errors(store, loss, FD_EPS, fault)?;
    Ok(GroupResult {
        group: format!("layer/{name}"),
        parameters: store.num_scalars(),
        max_relative_error: errors.iter().map(|e| e.1).fold(0.0, f64::max),
    })
}

/// Max relative error per parameter group: each layer type on its own,
/// then the tri-modal and bi-modal models end to end.
pub fn gradient_report(cfg: &ModelConfig, seed: u64, fault: Option<Primitive>) -> Result<Vec<GroupResult>> {
    let cfg = ModelConfig { dropout: 0.0, ..cfg.clone() };
    cfg.validate()?;
    let n = 2;
    let d = cfg.d_model;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = vec![true; n];
    let stack = StackConfig { d_model: d, heads: cfg.heads, d_ff: cfg.d_ff, layers: cfg.layers, positional: cfg.positional };
    let mut out = Vec::new();

    let x_in = random(&mut rng, &[n, 3]);
    let x_model = random(&mut rng, &[n, d]);
    let y_model = random(&mut rng, &[n, d]);

    {
        let mut store = ParamStore::new();
        let layer = DenseLayer::new(&mut store, &mut Initializer::new(seed), "dense", 3, d);
        out.push(layer_group("dense", &store, fault, |s| {
            let x = s.constant(x_in.clone());
            let y = layer.forward(s, x)?;
            probe(s, y, seed)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let layer = BiGruLayer::new(&mut store, &mut Initializer::new(seed), "bigru", 3, cfg.gru_hidden);
        out.push(layer_group("bigru", &store, fault, |s| {
            let x = s.constant(x_in.clone());
            let y = layer.forward(s, x, &mask)?;
            probe(s, y, seed)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let layer = ContextExtractor::new(&mut store, &mut Initializer::new(seed), "context", 3, cfg.gru_hidden, d);
        out.push(layer_group("context_extractor", &store, fault, |s| {
            let x = s.constant(x_in.clone());
            let y = extract_context(s, &layer, x, &mask)?;
            probe(s, y, seed)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let layer = MultiHeadAttention::new(&mut store, &mut Initializer::new(seed), "mha", d, cfg.heads)?;
        out.push(layer_group("attention", &store, fault, |s| {
            let q = s.constant(x_model.clone());
            let kv = s.constant(y_model.clone());
            let y = layer.forward(s, q, kv, kv, &mask)?;
            probe(s, y, seed)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let layer = TransformerStack::new(&mut store, &mut Initializer::new(seed), "transformer", stack)?;
        out.push(layer_group("transformer", &store, fault, |s| {
            let src = s.constant(x_model.clone());
            let tgt = s.constant(y_model.clone());
            let mem = layer.encode(s, src, &mask)?;
            let y = layer.decode(s, tgt, mem, &mask, &mask)?;
            probe(s, y, seed)
        })?);
    }
    {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let cell = FusionCell::new(&mut store, &mut init, (Modality::Text, 4), (Modality::Visual, 3), stack, true)?;
        out.push(layer_group("fusion_cell", &store, fault, |s| {
            let a = s.constant(x_model.clone());
            let b = s.constant(y_model.clone());
            let o = cell.forward(s, a, b, &mask)?;
            let f = probe(s, o.recon_fwd, seed)?;
            let r = probe(s, o.recon_bwd.expect("backward enabled"), seed + 1)?;
            let e = probe(s, o.enc_bwd.expect("backward enabled"), seed + 2)?;
            let fr = s.graph.add(f, r)?;
            s.graph.add(fr, e)
        })?);
    }

    let dims = toy_dims();
    let classes = 3;
    let video = toy_video(&dims, n, classes, seed);
    let weights = JointLossWeights::default();
    let variants = [
        ("trimodal", Modality::ALL.to_vec()),
        ("bimodal", vec![Modality::Text, Modality::Acoustic]),
    ];
    for (name, mods) in variants {
        let mc = ModelConfig { modalities: mods, ..cfg.clone() };
        let model = TransModality::new(&mc, &dims, classes, seed)?;
        let errors = param_gradient_errors(&model.params, |s| Ok(model.video_loss(s, &video, &weights)?.joint), FD_EPS, fault)?;
        out.extend(grouped(&format!("model:{name}"), &model.params, errors));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_report_passes_and_lists_groups_once() {
        let report = gradient_report(&toy_model_config(), 0, None).unwrap();
        let mut names: Vec<&str> = report.iter().map(|g| g.group.as_str()).collect();
        let total = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), total);
        assert!(names.contains(&"model:trimodal/ctx_t.gru"));
        assert!(names.contains(&"model:trimodal/cell_ta.bwd"));
        assert!(names.contains(&"model:bimodal/classifier"));
        for g in &report {
            assert!(g.passed(), "{} at {}", g.group, g.max_relative_error);
        }
    }

    #[test]
    fn corrupted_rule_is_caught() {
        let report = gradient_report(&toy_model_config(), 0, Some(Primitive::MatMul)).unwrap();
        assert!(report.iter().any(|g| !g.passed()));
        assert!(report.iter().find(|g| g.group == "layer/dense").is_some_and(|g| !g.passed()));
    }
}
